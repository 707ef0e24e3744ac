#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "floodline/depth.hpp"
#include "floodline/geo.hpp"

namespace floodline::panorama {

using Date = std::chrono::year_month_day;

/// Parses a strict ISO-8601 calendar date "YYYY-MM-DD". Throws InputError.
Date parse_date(std::string_view text);
std::string format_date(const Date& date);

struct PanoramaObservation {
  std::string parcel_id;
  geo::GeoPoint camera;
  double camera_elev_m = 0.0;
  double yaw_deg = 0.0;
  int width_px = 0;
  int height_px = 0;
  Date acquired{};
  depth::DepthMatrix depth;
  geo::PixelMask door_mask;
  geo::PixelMask roadside_mask;
  /// Supplied by upstream segmentation; false rejects the panorama in tier 1.
  bool structure_detected = true;

  /// Throws InputError when dimensions, camera pose or masks are inconsistent.
  void validate() const;
};

enum class ScreenStatus {
  accepted,
  rejected_date,
  rejected_distance,
  rejected_no_structure,
  rejected_no_door,
  rejected_no_depth,
  rejected_implausible,
};

std::string_view to_string(ScreenStatus s);
ScreenStatus parse_screen_status(std::string_view s);

/// Why a geometric estimate could not be produced.
enum class LfeFailure { no_door_pixels, no_door_depth, no_roadside_pixels, no_roadside_depth };

struct LfeEstimate {
  std::size_t door_pixel_count = 0;
  std::optional<double> lfe_m;
  std::optional<double> roadside_elev_m;
  std::optional<LfeFailure> failure;

  bool door_visible() const noexcept { return door_pixel_count > 0; }
  bool ok() const noexcept { return !failure.has_value(); }
};

/// Median of camera elevation plus depth*sin(pitch) over the lowest mask pixel
/// of every column in the window. Pixels on missing depth cells are skipped.
std::optional<double> median_surface_elevation(const PanoramaObservation& obs, const geo::PixelMask& bottoms);

/// Bearing -> window -> door-bottom pixels -> per-pixel elevation -> median,
/// for the door mask (LFE) and, identically, the roadside mask (RE).
LfeEstimate estimate_lfe(const PanoramaObservation& obs, const geo::GeoPoint& house);

struct ScreenThresholds {
  Date earliest{std::chrono::year{2015}, std::chrono::January, std::chrono::day{1}};
  double max_camera_distance_m = 50.0;
  double max_dem_deviation_m = 5.0;
};

/// Three-tier screen in order: (1) date, camera distance, structure flag;
/// (2) door pixels present; (3) |LFE - DEM| within tolerance. A missing DEM
/// sample cannot validate the estimate and is treated as implausible.
ScreenStatus screen(const PanoramaObservation& obs, const geo::GeoPoint& parcel_centroid,
                    std::optional<double> dem_elev_m, const LfeEstimate& estimate,
                    const ScreenThresholds& thresholds = {});

struct ElevationEstimate {
  std::string parcel_id;
  double lfe_m = 0.0;
  double roadside_elev_m = 0.0;
  double hdsl_m = 0.0;
  bool door_visible = false;
  ScreenStatus screen_status = ScreenStatus::rejected_no_door;
};

/// Full per-parcel Stage 1 evaluation. Door detection is only attempted for
/// panoramas that pass tier 1; hdsl_m = lfe_m - roadside_elev_m when accepted.
ElevationEstimate evaluate(const PanoramaObservation& obs, const geo::GeoPoint& parcel_centroid,
                           std::optional<double> dem_elev_m, const ScreenThresholds& thresholds = {});

/// One line of the panorama metadata file (JSON Lines), before the referenced
/// depth and mask files are loaded.
struct PanoramaRecord {
  std::string parcel_id;
  geo::GeoPoint camera;
  double camera_elev_m = 0.0;
  double yaw_deg = 0.0;
  int width_px = 0;
  int height_px = 0;
  Date acquired{};
  std::string depth_file;
  std::string door_mask_file;
  std::string roadside_mask_file;
  bool structure_detected = true;
};

/// Reads JSON Lines metadata. Relative file references resolve against `base_dir`.
std::vector<PanoramaRecord> read_panorama_records(const std::string& path, const std::string& base_dir);
void write_panorama_records(const std::string& path, const std::vector<PanoramaRecord>& records);

/// Mask text file: one "x y" integer pair per line; blank lines ignored.
geo::PixelMask read_mask_file(const std::string& path);
void write_mask_file(const std::string& path, const geo::PixelMask& mask);

PanoramaObservation load_observation(const PanoramaRecord& record);

}  // namespace floodline::panorama
