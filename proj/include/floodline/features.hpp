#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "floodline/geo.hpp"

namespace floodline::features {

enum class HdslSource { extracted, imputed, missing };

std::string_view to_string(HdslSource s);
HdslSource parse_hdsl_source(std::string_view s);

struct ParcelRecord {
  std::string parcel_id;
  std::string aoi_id;
  geo::GeoPoint centroid;
  std::string street_name;
  double assessed_value_usd = 0.0;
  std::optional<double> hdsl_m;
  HdslSource hdsl_source = HdslSource::missing;
};

/// Column order of the predictor vector; training and prediction share it.
enum Feature : std::size_t {
  kLatitude,
  kLongitude,
  kStreetNameEncoded,
  kDoorVisible,
  kHandM,
  kD2StreamSo0M,
  kD2StreamSo4M,
  kElevation,
  kMeanFathomMeter,
  kWaterDepth,
  kHandStreamRatio,
  kHandStreamProduct,
  kElevationSquared,
  kElevationHandDiff,
  kWaterDepthCombined,
  kWaterDepthMax,
  kGeoCluster,
  kFeatureCount
};

/// Table-style listings count latitude/longitude as one predictor (16 rows);
/// the vector carries them as separate columns.
inline constexpr std::size_t kNumFeatures = kFeatureCount;

inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "latitude",           "longitude",          "street_name_encoded",  "door_visible",
    "HAND_m",             "D2stream_so0_m",     "D2stream_so4_m",       "elevation",
    "mean_fathom_meter",  "water_depth",        "HAND_stream_ratio",    "HAND_stream_product",
    "elevation_squared",  "elevation_HAND_diff", "water_depth_combined", "water_depth_max",
    "geo_cluster",
};

using FeatureVector = std::array<double, kNumFeatures>;

/// Street names are case-folded and whitespace-trimmed, then numbered in sorted order.
std::string normalize_street(std::string_view name);

class StreetEncoder {
 public:
  StreetEncoder() = default;
  /// Fits on the given names (training rows only).
  explicit StreetEncoder(std::span<const std::string> names);

  /// Code in [0, k) for a known name, k (the reserved code) otherwise.
  int encode(std::string_view name) const;
  int reserved_code() const noexcept { return static_cast<int>(codes_.size()); }
  const std::map<std::string, int, std::less<>>& mapping() const noexcept { return codes_; }

 private:
  std::map<std::string, int, std::less<>> codes_;
};

struct BoundingBox {
  double lat_min = 0.0;
  double lat_max = 0.0;
  double lon_min = 0.0;
  double lon_max = 0.0;

  static BoundingBox of(std::span<const geo::GeoPoint> points);
};

/// 5x5 lat/lon bin index, row-major from the south-west corner, in [0, 24].
int geo_cluster(const geo::GeoPoint& p, const BoundingBox& box);

/// Raster samples for one parcel, already in meters. `flood_surface_m` is the
/// flood surface elevation (depth layers converted upstream).
struct LayerSamples {
  std::optional<double> hand_m;
  std::optional<double> d2stream_so0_m;
  std::optional<double> d2stream_so4_m;
  std::optional<double> elevation_m;
  std::optional<double> flood_surface_m;
};

/// All predictors, or nullopt when any raster sample is missing (such a
/// parcel is excluded from both training and prediction).
std::optional<FeatureVector> build_features(const ParcelRecord& parcel, const LayerSamples& samples,
                                            bool door_visible, const StreetEncoder& encoder,
                                            const BoundingBox& box);

/// Recomputes the derived columns from the base columns of `v`.
FeatureVector with_derived(const FeatureVector& v);

}  // namespace floodline::features
