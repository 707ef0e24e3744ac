#include "floodline/synth.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>

#include <fmt/format.h>

#include "floodline/depth.hpp"
#include "floodline/errors.hpp"
#include "floodline/geo.hpp"
#include "floodline/io.hpp"
#include "floodline/panorama.hpp"
#include "floodline/raster.hpp"
#include "floodline/rng.hpp"

namespace floodline::synth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) && !j.at(key).is_null() ? j.at(key).get<T>() : fallback;
}

AoiParams parse_aoi(const json& j) {
  AoiParams a;
  a.id = get_or<std::string>(j, "id", a.id);
  a.n_parcels = get_or(j, "n_parcels", a.n_parcels);
  a.workflow = ml::parse_workflow_mode(get_or<std::string>(j, "workflow", std::string(ml::to_string(a.workflow))));
  const auto model = get_or<std::string>(j, "hdsl_model", "linear");
  if (model == "linear") {
    a.model = HdslModel::linear;
  } else if (model == "noise") {
    a.model = HdslModel::noise;
  } else {
    throw InputError("synth: unknown hdsl_model '" + model + "'");
  }
  a.intercept = get_or(j, "intercept", a.intercept);
  a.elevation_coef = get_or(j, "elevation_coef", a.elevation_coef);
  a.hand_coef = get_or(j, "hand_coef", a.hand_coef);
  a.sigma = get_or(j, "sigma", a.sigma);
  a.noise_lo = get_or(j, "noise_lo", a.noise_lo);
  a.noise_hi = get_or(j, "noise_hi", a.noise_hi);
  a.coverage = get_or(j, "coverage", a.coverage);
  a.door_visibility = get_or(j, "door_visibility", a.door_visibility);
  a.flood_offset_m = get_or(j, "flood_offset_m", a.flood_offset_m);
  a.center_lat = get_or(j, "center_lat", a.center_lat);
  a.center_lon = get_or(j, "center_lon", a.center_lon);
  if (a.n_parcels == 0) throw InputError("synth: n_parcels must be positive");
  if (a.coverage < 0 || a.coverage > 1 || a.door_visibility < 0 || a.door_visibility > 1) {
    throw InputError("synth: rates must lie in [0, 1]");
  }
  if (a.sigma < 0) throw InputError("synth: sigma must be non-negative");
  return a;
}

constexpr double kSpacingDeg = 0.0003;
constexpr double kJitterDeg = 0.00008;
constexpr double kCellDeg = 0.0001;
constexpr double kMarginDeg = 0.0006;
constexpr int kWidthPx = 2048;
constexpr int kHeightPx = 1024;
constexpr float kBackgroundDepth = 25.0f;

/// Terrain and hazard surfaces over the unit square of the raster extent.
double dem_at(double u, double v) {
  return 3.0 + 6.0 * u + 2.0 * v + 1.5 * std::sin(2.0 * std::numbers::pi * 1.3 * u) * std::cos(2.0 * std::numbers::pi * 0.9 * v);
}
double hand_at(double u, double v) { return 0.5 + 2.0 * v + 0.8 * (1.0 + std::sin(2.0 * std::numbers::pi * (0.6 * u + 0.3 * v))); }
double stream_so0_at(double, double v) { return 30.0 + 400.0 * std::abs(v - 0.15); }
double stream_so4_at(double u, double) { return 50.0 + 900.0 * std::abs(u - 0.9); }
double flood_surface_at(double u, double v) { return 4.3 + 5.6 * u + 2.0 * v; }

/// Depth cells handed out to panoramas sharing one depth file. Each parcel
/// owns its door and roadside cells, so one grid can serve many panoramas.
class SlotPool {
 public:
  SlotPool(int row_lo, int row_hi) : row_lo_(row_lo), rows_(row_hi - row_lo + 1) {}
  std::optional<std::pair<int, int>> take() {
    const int total = rows_ * kCols;
    if (next_ >= total) return std::nullopt;
    // Stride coprime with the pool size spreads pitches across the image.
    const int slot = static_cast<int>((static_cast<long long>(next_++) * 37) % total);
    return std::pair{row_lo_ + slot % rows_, kColLo + slot / rows_};
  }
  int remaining() const noexcept { return rows_ * kCols - next_; }

 private:
  static constexpr int kColLo = 194;  // window centered on column 1024 spans depth columns 192..319
  static constexpr int kCols = 124;
  int row_lo_;
  int rows_;
  int next_ = 0;
};

struct DepthSheet {
  depth::DepthMatrix grid{kBackgroundDepth};
  SlotPool below{136, 223};
  SlotPool above{32, 119};
  std::string name;

  DepthSheet() {
    for (int r = 0; r < 16; ++r) {
      for (int c = 0; c < depth::DepthMatrix::kCols; ++c) grid.set(r, c, std::nanf(""));
    }
  }
};

geo::PixelMask rectangle(int depth_col, int bottom_row, int height) {
  std::vector<geo::Pixel> px;
  for (int x = 4 * depth_col; x < 4 * depth_col + 4; ++x) {
    for (int y = bottom_row - height; y <= bottom_row; ++y) px.push_back({x, y});
  }
  return geo::PixelMask(std::move(px));
}

std::string mask_text(const geo::PixelMask& m) {
  std::string s;
  for (const auto& p : m.pixels()) s += fmt::format("{} {}\n", p.x, p.y);
  return s;
}

raster::RasterGrid make_grid(int ncols, int nrows, double xll, double yll, raster::Units units,
                             const std::function<std::optional<double>(double, double)>& f) {
  raster::RasterGrid g;
  g.ncols = ncols;
  g.nrows = nrows;
  g.xll = xll;
  g.yll = yll;
  g.cellsize = kCellDeg;
  g.units = units;
  g.values.resize(static_cast<std::size_t>(ncols) * nrows);
  for (int r = 0; r < nrows; ++r) {
    for (int c = 0; c < ncols; ++c) {
      const double u = (c + 0.5) / ncols;
      const double v = (nrows - r - 0.5) / nrows;
      g.at(r, c) = f(u, v).value_or(g.nodata);
    }
  }
  return g;
}

struct PlacedCell {
  int depth_row;
  int depth_col;
  int bottom_px;
  double pitch_deg;
};

/// Takes a cell on the side of the horizon matching the sign of `dh` and
/// stores the depth that reproduces `dh`. Returns the realized offset.
double place(DepthSheet& sheet, double dh, PlacedCell& cell) {
  auto slot = dh < 0 ? sheet.below.take() : sheet.above.take();
  if (!slot) throw std::logic_error("depth sheet exhausted");
  cell.depth_row = slot->first;
  cell.depth_col = slot->second;
  cell.bottom_px = 4 * cell.depth_row + 3;
  cell.pitch_deg = geo::pitch_angle(cell.bottom_px, kHeightPx);
  const float d = static_cast<float>(dh / std::sin(cell.pitch_deg * std::numbers::pi / 180.0));
  sheet.grid.set(cell.depth_row, cell.depth_col, d);
  return geo::vertical_offset(static_cast<double>(d), cell.pitch_deg);
}

void write_aoi(const Params& params, const AoiParams& a, const std::string& dir) {
  const RngStream root = RngStream(params.seed).child("synth").child(a.id);
  Pcg32 layout = root.child("layout").engine();
  Pcg32 target = root.child("hdsl").engine();
  Pcg32 imagery = root.child("imagery").engine();
  Pcg32 values = root.child("values").engine();

  // Parcel centroids on a jittered square lattice.
  const auto g = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(a.n_parcels))));
  const double half = static_cast<double>(g) * kSpacingDeg / 2.0;
  std::vector<geo::GeoPoint> centroids;
  std::vector<std::size_t> lattice_row;
  for (std::size_t k = 0; k < a.n_parcels; ++k) {
    const auto i = k / g;
    const auto j = k % g;
    const double lat = a.center_lat - half + (static_cast<double>(i) + 0.5) * kSpacingDeg + layout.uniform(-kJitterDeg, kJitterDeg);
    const double lon = a.center_lon - half + (static_cast<double>(j) + 0.5) * kSpacingDeg + layout.uniform(-kJitterDeg, kJitterDeg);
    centroids.push_back({lat, lon});
    lattice_row.push_back(i);
  }

  const double xll = a.center_lon - half - kMarginDeg;
  const double yll = a.center_lat - half - kMarginDeg;
  const int n_cells = static_cast<int>(std::ceil((2.0 * half + 2.0 * kMarginDeg) / kCellDeg));
  auto some = [](double (*f)(double, double)) {
    return [f](double u, double v) -> std::optional<double> { return f(u, v); };
  };
  const auto dem = make_grid(n_cells, n_cells, xll, yll, raster::Units::meters, some(dem_at));
  const auto hand = make_grid(n_cells, n_cells, xll, yll, raster::Units::meters, some(hand_at));
  const auto so0 = make_grid(n_cells, n_cells, xll, yll, raster::Units::meters, some(stream_so0_at));
  const auto so4 = make_grid(n_cells, n_cells, xll, yll, raster::Units::meters, some(stream_so4_at));
  const double offset = a.flood_offset_m;
  const auto fathom = make_grid(n_cells, n_cells, xll, yll, raster::Units::feet, [&](double u, double v) -> std::optional<double> {
    const double surface = flood_surface_at(u, v) + offset;
    if (surface <= dem_at(u, v)) return std::nullopt;  // dry cell
    return surface / raster::kFeetToMeters;
  });

  const std::string raster_dir = (fs::path(dir) / "rasters").string();
  fs::create_directories(raster_dir);
  std::map<std::string, raster::LayerSpec> layers;
  auto emit = [&](std::string_view name, const raster::RasterGrid& grid) {
    const std::string file = std::string(name) + ".asc";
    raster::write_grid_file((fs::path(raster_dir) / file).string(), grid);
    layers[std::string(name)] = {file, grid.units, raster::FloodSemantic::surface_elevation};
  };
  emit(raster::kDem, dem);
  emit(raster::kHand, hand);
  emit(raster::kStreamAny, so0);
  emit(raster::kStreamOrder4, so4);
  emit(raster::kFathom, fathom);
  raster::write_manifest((fs::path(raster_dir) / "manifest.json").string(), layers);

  static constexpr const char* kStreets[] = {"Oak", "Elm", "Pine", "Maple", "Cedar", "Birch", "Willow", "Pecan"};

  io::CsvWriter parcels({"parcel_id", "aoi_id", "lat", "lon", "street_name", "assessed_value_usd"});
  io::CsvWriter truth({"parcel_id", "hdsl_m", "has_imagery", "door_visible", "street_elev_m", "elevation_m", "hand_m"});
  std::vector<panorama::PanoramaRecord> records;
  std::vector<DepthSheet> sheets(1);
  sheets.back().name = "pano/depth_000.b64";
  const auto base_date = std::chrono::sys_days{std::chrono::year{2016} / std::chrono::January / 1};

  for (std::size_t k = 0; k < a.n_parcels; ++k) {
    const auto& p = centroids[k];
    const std::string id = fmt::format("{}-{:05d}", a.id, k);
    const double elev = *raster::point_sample(dem, p.lon, p.lat).value;
    const double hnd = *raster::point_sample(hand, p.lon, p.lat).value;

    double hdsl = 0.0;
    if (a.model == HdslModel::linear) {
      hdsl = a.intercept + a.elevation_coef * elev + a.hand_coef * hnd;
      if (a.sigma > 0) hdsl += a.sigma * target.normal();
    } else {
      hdsl = target.uniform(a.noise_lo, a.noise_hi);
    }
    hdsl = std::max(hdsl, 0.0);

    const std::string street = fmt::format("{} {}", kStreets[lattice_row[k] % 8], lattice_row[k] < 8 ? "St" : "Ave");
    const double value = std::round(std::exp(std::log(220000.0) + 0.35 * values.normal()));
    parcels.row({id, a.id, io::fmt_double(p.lat), io::fmt_double(p.lon), street, io::fmt_double(value)});

    const bool has_imagery = imagery.uniform() < a.coverage;
    const bool door_visible = imagery.uniform() < a.door_visibility;
    const double dn = -imagery.uniform(12.0, 30.0);
    const double de = imagery.uniform(-8.0, 8.0);
    const int age_days = static_cast<int>(imagery.bounded(2500));
    truth.row({id, io::fmt_double(hdsl), has_imagery ? "1" : "0", has_imagery && door_visible ? "1" : "0",
               io::fmt_double(elev), io::fmt_double(elev), io::fmt_double(hnd)});
    if (!has_imagery) continue;

    if (sheets.back().below.remaining() < 2 || sheets.back().above.remaining() < 1) {
      sheets.emplace_back();
      sheets.back().name = fmt::format("pano/depth_{:03d}.b64", sheets.size() - 1);
    }
    DepthSheet& sheet = sheets.back();

    panorama::PanoramaRecord r;
    r.parcel_id = id;
    constexpr double kDeg = 180.0 / std::numbers::pi;
    r.camera = {p.lat + dn / geo::kEarthRadiusM * kDeg,
                p.lon + de / (geo::kEarthRadiusM * std::cos(p.lat / kDeg)) * kDeg};
    // Column 0 looks 180 degrees away from the house, so it sits at column 1024.
    r.yaw_deg = geo::bearing(r.camera, p) - 180.0;
    if (r.yaw_deg < 0) r.yaw_deg += 360.0;
    r.width_px = kWidthPx;
    r.height_px = kHeightPx;
    r.acquired = std::chrono::year_month_day{base_date + std::chrono::days{age_days}};
    r.depth_file = sheet.name;
    r.structure_detected = true;

    // Roadside point sits at the DEM elevation under the centroid; the door
    // sits hdsl above it. Depths are chosen so the geometry reproduces both.
    const double cam_height = std::abs(hdsl - kCameraHeightM) < 0.05 ? kCameraHeightM + 0.7 : kCameraHeightM;
    PlacedCell road{};
    const double road_dh = place(sheet, -cam_height, road);
    r.camera_elev_m = elev - road_dh;
    const std::string road_file = fmt::format("pano/masks/{}_road.txt", id);
    io::write_atomic((fs::path(dir) / road_file).string(), mask_text(rectangle(road.depth_col, road.bottom_px, 2)));
    r.roadside_mask_file = road_file;

    if (door_visible) {
      PlacedCell door{};
      place(sheet, (elev + hdsl) - r.camera_elev_m, door);
      const std::string door_file = fmt::format("pano/masks/{}_door.txt", id);
      io::write_atomic((fs::path(dir) / door_file).string(), mask_text(rectangle(door.depth_col, door.bottom_px, 10)));
      r.door_mask_file = door_file;
    }
    records.push_back(std::move(r));
  }

  fs::create_directories(fs::path(dir) / "pano");
  for (const auto& s : sheets) depth::write_depth_file((fs::path(dir) / s.name).string(), s.grid);
  panorama::write_panorama_records((fs::path(dir) / "panoramas.jsonl").string(), records);
  io::write_atomic((fs::path(dir) / "parcels.csv").string(), parcels.str());
  io::write_atomic((fs::path(dir) / "truth.csv").string(), truth.str());
}

}  // namespace

Params parse_params(const json& doc, const std::string& base_dir) {
  try {
    Params p;
    p.output_dir = get_or<std::string>(doc, "output_dir", p.output_dir);
    if (!fs::path(p.output_dir).is_absolute()) p.output_dir = (fs::path(base_dir) / p.output_dir).string();
    p.seed = get_or(doc, "seed", p.seed);
    p.n_iter = get_or(doc, "n_iter", p.n_iter);
    p.k_folds = get_or(doc, "k_folds", p.k_folds);
    p.threads = get_or(doc, "threads", p.threads);
    if (doc.contains("aois")) {
      for (const auto& a : doc.at("aois")) p.aois.push_back(parse_aoi(a));
    } else {
      p.aois.push_back(parse_aoi(doc));
    }
    return p;
  } catch (const json::exception& e) {
    throw InputError(std::string("synth parameters: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("synth parameters: ") + e.what());
  }
}

Params load_params(const std::string& path) {
  try {
    const auto dir = fs::path(path).parent_path().string();
    return parse_params(json::parse(io::read_file(path)), dir.empty() ? "." : dir);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

void cmd_synth(const Params& params) {
  json config;
  config["rng_seed"] = params.seed;
  config["n_iter"] = params.n_iter;
  config["k_folds"] = params.k_folds;
  config["threads"] = params.threads;
  config["output_dir"] = "out";
  config["aois"] = json::array();
  for (const auto& a : params.aois) {
    write_aoi(params, a, (fs::path(params.output_dir) / a.id).string());
    config["aois"].push_back({{"id", a.id},
                              {"workflow", std::string(ml::to_string(a.workflow))},
                              {"rasters", a.id + "/rasters/manifest.json"},
                              {"parcels", a.id + "/parcels.csv"},
                              {"panoramas", a.id + "/panoramas.jsonl"}});
  }
  io::write_atomic((fs::path(params.output_dir) / "config.json").string(), config.dump(2) + "\n");
}

}  // namespace floodline::synth
