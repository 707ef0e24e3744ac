#include "floodline/geo.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace floodline::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

int wrap(int value, int modulus) noexcept {
  const int r = value % modulus;
  return r < 0 ? r + modulus : r;
}

}  // namespace

bool GeoPoint::valid() const noexcept {
  return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 && lon >= -180.0 &&
         lon <= 180.0;
}

double bearing(const GeoPoint& camera, const GeoPoint& house) {
  const double lat_c = camera.lat * kDegToRad;
  const double lat_h = house.lat * kDegToRad;
  const double dlat = (house.lat - camera.lat) * kDegToRad;
  const double dlon = (house.lon - camera.lon) * kDegToRad;

  // cos(c)sin(h) - sin(c)cos(h)cos(dlon), rewritten without cancellation so
  // street-scale offsets keep full precision.
  const double half = std::sin(0.5 * dlon);
  const double x = std::sin(dlon) * std::cos(lat_h);
  const double y = std::sin(dlat) + 2.0 * std::sin(lat_c) * std::cos(lat_h) * half * half;

  double deg = std::atan2(x, y) * kRadToDeg;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

double haversine_m(const GeoPoint& a, const GeoPoint& b) {
  const double dlat = (b.lat - a.lat) * kDegToRad;
  const double dlon = (b.lon - a.lon) * kDegToRad;
  const double s = std::sin(dlat / 2.0);
  const double t = std::sin(dlon / 2.0);
  const double h = s * s + std::cos(a.lat * kDegToRad) * std::cos(b.lat * kDegToRad) * t * t;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

int bearing_to_column(double bearing_deg, double yaw_deg, int width_px) {
  if (width_px <= 0) throw std::invalid_argument("panorama width must be positive");
  double rel = std::fmod(bearing_deg - yaw_deg, 360.0);
  if (rel < 0.0) rel += 360.0;
  const auto col = static_cast<long long>(std::llround(rel / 360.0 * width_px));
  return static_cast<int>(col % width_px);
}

bool ColumnWindow::contains(int column) const noexcept {
  if (column < 0 || column >= width) return false;
  return wrap(column - start, width) < count;
}

std::vector<int> ColumnWindow::columns() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(wrap(start + i, width));
  return out;
}

ColumnWindow segmentation_window(int center_col, int width_px) {
  if (width_px <= 0) throw std::invalid_argument("panorama width must be positive");
  const int half = width_px / 8;
  return ColumnWindow{wrap(center_col - half, width_px), std::min(2 * half, width_px), width_px};
}

PixelMask::PixelMask(std::vector<Pixel> pixels) : pixels_(std::move(pixels)) {
  std::sort(pixels_.begin(), pixels_.end());
  pixels_.erase(std::unique(pixels_.begin(), pixels_.end()), pixels_.end());
}

bool PixelMask::in_bounds(int width, int height) const noexcept {
  return std::all_of(pixels_.begin(), pixels_.end(),
                     [&](const Pixel& p) { return p.x >= 0 && p.x < width && p.y >= 0 && p.y < height; });
}

PixelMask door_bottom_pixels(const PixelMask& mask, const ColumnWindow& window) {
  // Pixels are sorted by (x, y), so the last pixel seen for a column is its lowest.
  std::vector<Pixel> lowest;
  for (const Pixel& p : mask.pixels()) {
    if (!window.contains(p.x)) continue;
    if (!lowest.empty() && lowest.back().x == p.x) {
      lowest.back().y = p.y;
    } else {
      lowest.push_back(p);
    }
  }
  return PixelMask(std::move(lowest));
}

double pitch_angle(int row, int height_px) {
  if (height_px <= 0) throw std::invalid_argument("panorama height must be positive");
  if (row < 0 || row >= height_px) throw std::out_of_range("pixel row outside panorama");
  const double h = static_cast<double>(height_px);
  return (h / 2.0 - static_cast<double>(row)) / h * 180.0;
}

double vertical_offset(double depth_m, double pitch_deg) {
  if (!(depth_m > 0.0) || !std::isfinite(depth_m)) {
    throw std::invalid_argument("depth must be positive and finite");
  }
  return depth_m * std::sin(pitch_deg * kDegToRad);
}

}  // namespace floodline::geo
