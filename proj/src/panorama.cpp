#include "floodline/panorama.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "floodline/errors.hpp"
#include "floodline/stats.hpp"

namespace floodline::panorama {

namespace fs = std::filesystem;
using nlohmann::json;

Date parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char tail = 0;
  const std::string s(text);
  if (s.size() != 10 || s[4] != '-' || s[7] != '-' ||
      std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
    throw InputError("invalid ISO-8601 date '" + s + "'");
  }
  const Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw InputError("invalid calendar date '" + s + "'");
  return date;
}

std::string format_date(const Date& date) {
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(date.year()), static_cast<unsigned>(date.month()),
                     static_cast<unsigned>(date.day()));
}

void PanoramaObservation::validate() const {
  if (width_px <= 0 || height_px <= 0) throw InputError(parcel_id + ": panorama dimensions must be positive");
  if (width_px != 2 * height_px) throw InputError(parcel_id + ": equirectangular panorama must be 2:1");
  if (!camera.valid()) throw InputError(parcel_id + ": camera position out of range");
  if (!std::isfinite(camera_elev_m) || !std::isfinite(yaw_deg)) {
    throw InputError(parcel_id + ": camera elevation and yaw must be finite");
  }
  if (!door_mask.in_bounds(width_px, height_px) || !roadside_mask.in_bounds(width_px, height_px)) {
    throw InputError(parcel_id + ": mask pixel outside panorama");
  }
}

namespace {

constexpr std::string_view kStatusNames[] = {
    "accepted",       "rejected_date",     "rejected_distance",    "rejected_no_structure",
    "rejected_no_door", "rejected_no_depth", "rejected_implausible",
};

}  // namespace

std::string_view to_string(ScreenStatus s) { return kStatusNames[static_cast<int>(s)]; }

ScreenStatus parse_screen_status(std::string_view s) {
  for (int i = 0; i < static_cast<int>(std::size(kStatusNames)); ++i) {
    if (kStatusNames[i] == s) return static_cast<ScreenStatus>(i);
  }
  throw InputError("unknown screen status '" + std::string(s) + "'");
}

std::optional<double> median_surface_elevation(const PanoramaObservation& obs, const geo::PixelMask& bottoms) {
  std::vector<double> elevations;
  elevations.reserve(bottoms.size());
  for (const auto& p : bottoms.pixels()) {
    const auto [row, col] = depth::DepthMatrix::cell_for_pixel(p.x, p.y, obs.width_px, obs.height_px);
    const auto d = obs.depth.at(row, col);
    if (!d) continue;
    elevations.push_back(obs.camera_elev_m + geo::vertical_offset(*d, geo::pitch_angle(p.y, obs.height_px)));
  }
  return stats::median_or_empty(elevations);
}

LfeEstimate estimate_lfe(const PanoramaObservation& obs, const geo::GeoPoint& house) {
  LfeEstimate est;
  const double b = geo::bearing(obs.camera, house);
  const auto window = geo::segmentation_window(geo::bearing_to_column(b, obs.yaw_deg, obs.width_px), obs.width_px);

  const auto door = geo::door_bottom_pixels(obs.door_mask, window);
  est.door_pixel_count = door.size();
  if (door.empty()) {
    est.failure = LfeFailure::no_door_pixels;
    return est;
  }
  est.lfe_m = median_surface_elevation(obs, door);
  if (!est.lfe_m) {
    est.failure = LfeFailure::no_door_depth;
    return est;
  }

  const auto road = geo::door_bottom_pixels(obs.roadside_mask, window);
  if (road.empty()) {
    est.failure = LfeFailure::no_roadside_pixels;
    return est;
  }
  est.roadside_elev_m = median_surface_elevation(obs, road);
  if (!est.roadside_elev_m) est.failure = LfeFailure::no_roadside_depth;
  return est;
}

namespace {

std::optional<ScreenStatus> screen_tier1(const PanoramaObservation& obs, const geo::GeoPoint& centroid,
                                         const ScreenThresholds& t) {
  if (obs.acquired < t.earliest) return ScreenStatus::rejected_date;
  if (geo::haversine_m(obs.camera, centroid) > t.max_camera_distance_m) return ScreenStatus::rejected_distance;
  if (!obs.structure_detected) return ScreenStatus::rejected_no_structure;
  return std::nullopt;
}

}  // namespace

ScreenStatus screen(const PanoramaObservation& obs, const geo::GeoPoint& parcel_centroid,
                    std::optional<double> dem_elev_m, const LfeEstimate& estimate, const ScreenThresholds& t) {
  if (auto rejected = screen_tier1(obs, parcel_centroid, t)) return *rejected;
  if (!estimate.door_visible()) return ScreenStatus::rejected_no_door;
  if (!estimate.ok()) return ScreenStatus::rejected_no_depth;
  if (!dem_elev_m || !(std::abs(*estimate.lfe_m - *dem_elev_m) <= t.max_dem_deviation_m)) {
    return ScreenStatus::rejected_implausible;
  }
  return ScreenStatus::accepted;
}

ElevationEstimate evaluate(const PanoramaObservation& obs, const geo::GeoPoint& parcel_centroid,
                           std::optional<double> dem_elev_m, const ScreenThresholds& thresholds) {
  ElevationEstimate out;
  out.parcel_id = obs.parcel_id;
  if (auto rejected = screen_tier1(obs, parcel_centroid, thresholds)) {
    out.screen_status = *rejected;
    return out;
  }
  const LfeEstimate est = estimate_lfe(obs, parcel_centroid);
  out.door_visible = est.door_visible();
  out.screen_status = screen(obs, parcel_centroid, dem_elev_m, est, thresholds);
  if (out.screen_status == ScreenStatus::accepted) {
    out.lfe_m = *est.lfe_m;
    out.roadside_elev_m = *est.roadside_elev_m;
    out.hdsl_m = out.lfe_m - out.roadside_elev_m;
  }
  return out;
}

namespace {

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? p : (fs::path(base_dir) / path).lexically_normal().string();
}

}  // namespace

std::vector<PanoramaRecord> read_panorama_records(const std::string& path, const std::string& base_dir) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open panorama metadata " + path);
  std::vector<PanoramaRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      PanoramaRecord r;
      r.parcel_id = j.at("parcel_id").get<std::string>();
      r.camera = {j.at("camera_lat").get<double>(), j.at("camera_lon").get<double>()};
      r.camera_elev_m = j.at("camera_elev_m").get<double>();
      r.yaw_deg = j.at("yaw_deg").get<double>();
      r.width_px = j.at("width_px").get<int>();
      r.height_px = j.at("height_px").get<int>();
      r.acquired = parse_date(j.at("acquired").get<std::string>());
      r.depth_file = resolve(base_dir, j.at("depth_file").get<std::string>());
      r.door_mask_file = resolve(base_dir, j.value("door_mask_file", std::string{}));
      r.roadside_mask_file = resolve(base_dir, j.value("roadside_mask_file", std::string{}));
      r.structure_detected = j.value("structure_detected", true);
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(line_no, path + ": " + e.what());
    } catch (const InputError& e) {
      throw ParseError(line_no, path + ": " + e.what());
    }
  }
  return out;
}

void write_panorama_records(const std::string& path, const std::vector<PanoramaRecord>& records) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  for (const auto& r : records) {
    json j;
    j["parcel_id"] = r.parcel_id;
    j["camera_lat"] = r.camera.lat;
    j["camera_lon"] = r.camera.lon;
    j["camera_elev_m"] = r.camera_elev_m;
    j["yaw_deg"] = r.yaw_deg;
    j["width_px"] = r.width_px;
    j["height_px"] = r.height_px;
    j["acquired"] = format_date(r.acquired);
    j["depth_file"] = r.depth_file;
    j["door_mask_file"] = r.door_mask_file;
    j["roadside_mask_file"] = r.roadside_mask_file;
    j["structure_detected"] = r.structure_detected;
    out << j.dump() << '\n';
  }
}

geo::PixelMask read_mask_file(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mask file " + path);
  std::vector<geo::Pixel> pixels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    geo::Pixel p;
    std::string extra;
    if (!(ss >> p.x >> p.y) || (ss >> extra)) throw ParseError(line_no, path + ": expected \"x y\" integer pair");
    pixels.push_back(p);
  }
  return geo::PixelMask(std::move(pixels));
}

void write_mask_file(const std::string& path, const geo::PixelMask& mask) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  for (const auto& p : mask.pixels()) out << p.x << ' ' << p.y << '\n';
}

PanoramaObservation load_observation(const PanoramaRecord& record) {
  PanoramaObservation obs;
  obs.parcel_id = record.parcel_id;
  obs.camera = record.camera;
  obs.camera_elev_m = record.camera_elev_m;
  obs.yaw_deg = record.yaw_deg;
  obs.width_px = record.width_px;
  obs.height_px = record.height_px;
  obs.acquired = record.acquired;
  obs.depth = depth::read_depth_file(record.depth_file);
  obs.door_mask = read_mask_file(record.door_mask_file);
  obs.roadside_mask = read_mask_file(record.roadside_mask_file);
  obs.structure_detected = record.structure_detected;
  obs.validate();
  return obs;
}

}  // namespace floodline::panorama
