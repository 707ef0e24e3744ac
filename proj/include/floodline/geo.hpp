#pragma once

#include <cstdint>
#include <vector>

namespace floodline::geo {

inline constexpr double kEarthRadiusM = 6'371'000.0;

/// WGS84 latitude/longitude in degrees.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  bool valid() const noexcept;
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Forward bearing from `camera` to `house`, degrees clockwise from north in [0, 360).
double bearing(const GeoPoint& camera, const GeoPoint& house);

/// Great-circle distance in meters (haversine, mean Earth radius).
double haversine_m(const GeoPoint& a, const GeoPoint& b);

/// Panorama column whose viewing azimuth equals `bearing_deg` for a camera
/// whose column 0 looks along `yaw_deg`.
int bearing_to_column(double bearing_deg, double yaw_deg, int width_px);

/// Half-open band of panorama columns [start, start + count), wrapping at `width`.
struct ColumnWindow {
  int start = 0;
  int count = 0;
  int width = 1;

  bool contains(int column) const noexcept;
  /// Columns in window order, starting at `start`.
  std::vector<int> columns() const;
};

/// The +-45 degree band around `center_col`: [center - width/8, center + width/8).
ColumnWindow segmentation_window(int center_col, int width_px);

struct Pixel {
  int x = 0;  ///< column
  int y = 0;  ///< row, 0 at the top
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Set of full-resolution panorama pixels, kept sorted and duplicate-free.
class PixelMask {
 public:
  PixelMask() = default;
  explicit PixelMask(std::vector<Pixel> pixels);

  const std::vector<Pixel>& pixels() const noexcept { return pixels_; }
  bool empty() const noexcept { return pixels_.empty(); }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool in_bounds(int width, int height) const noexcept;

 private:
  std::vector<Pixel> pixels_;
};

/// Lowest (maximum row) mask pixel in every window column the mask touches.
PixelMask door_bottom_pixels(const PixelMask& mask, const ColumnWindow& window);

/// Elevation angle of image row `row` in degrees: +90 at the top row, 0 at the horizon.
double pitch_angle(int row, int height_px);

/// Height of the observed point relative to the camera: depth * sin(pitch).
/// Throws std::invalid_argument for non-positive or non-finite depth.
double vertical_offset(double depth_m, double pitch_deg);

}  // namespace floodline::geo
