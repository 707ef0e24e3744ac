#include "floodline/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <set>

#include <fmt/format.h>

#include "floodline/errors.hpp"
#include "floodline/io.hpp"
#include "floodline/model_io.hpp"
#include "floodline/panorama.hpp"
#include "floodline/raster.hpp"
#include "floodline/risk.hpp"
#include "floodline/stats.hpp"

namespace floodline::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using features::HdslSource;

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

template <typename T>
T field_or(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key) || doc.at(key).is_null()) return fallback;
  return doc.at(key).get<T>();
}

}  // namespace

bool RunConfig::is_selected(const std::string& aoi_id) const {
  return selected.empty() || std::find(selected.begin(), selected.end(), aoi_id) != selected.end();
}

std::string RunConfig::resolve(const std::string& path) const {
  if (path.empty()) return path;
  const fs::path p(path);
  return p.is_absolute() ? path : (fs::path(base_dir) / p).lexically_normal().string();
}

std::string RunConfig::aoi_dir(const std::string& aoi_id) const { return join(resolve(output_dir), aoi_id); }

std::string RunConfig::out_path(const std::string& relative) const { return join(resolve(output_dir), relative); }

json RunConfig::to_json() const {
  json doc;
  doc["rng_seed"] = rng_seed;
  doc["gate_threshold"] = io::fmt_double(gate_threshold);
  doc["tie_window"] = io::fmt_double(tie_window);
  doc["n_iter"] = n_iter;
  doc["k_folds"] = k_folds;
  json aoi_list = json::array();
  for (const auto& a : aois) {
    aoi_list.push_back({{"id", a.id},
                        {"workflow", std::string(ml::to_string(a.workflow))},
                        {"rasters", a.rasters},
                        {"parcels", a.parcels},
                        {"panoramas", a.panoramas}});
  }
  doc["aois"] = std::move(aoi_list);
  return doc;
}

std::string RunConfig::hash() const { return io::sha256_hex(to_json().dump()); }

RunConfig parse_config(const json& doc, const std::string& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  try {
    if (!doc.is_object()) throw InputError("config must be a JSON object");
    if (!doc.contains("rng_seed")) throw InputError("config: rng_seed is required");
    c.rng_seed = doc.at("rng_seed").get<std::uint64_t>();
    c.gate_threshold = field_or(doc, "gate_threshold", c.gate_threshold);
    c.tie_window = field_or(doc, "tie_window", c.tie_window);
    c.n_iter = field_or(doc, "n_iter", c.n_iter);
    c.k_folds = field_or(doc, "k_folds", c.k_folds);
    c.output_dir = field_or(doc, "output_dir", c.output_dir);
    c.threads = field_or(doc, "threads", c.threads);
    if (c.n_iter < 1) throw InputError("config: n_iter must be >= 1");
    if (c.k_folds < 2) throw InputError("config: k_folds must be >= 2");
    if (c.threads < 1) throw InputError("config: threads must be >= 1");
    if (!(c.tie_window >= 0.0)) throw InputError("config: tie_window must be >= 0");

    std::set<std::string> ids;
    std::set<std::string> paths;
    for (const auto& a : doc.at("aois")) {
      AoiConfig aoi;
      aoi.id = a.at("id").get<std::string>();
      aoi.workflow = ml::parse_workflow_mode(field_or<std::string>(a, "workflow", "tuning_extended"));
      aoi.rasters = a.at("rasters").get<std::string>();
      aoi.parcels = a.at("parcels").get<std::string>();
      aoi.panoramas = field_or<std::string>(a, "panoramas", "");
      if (aoi.id.empty() || aoi.id.find_first_of("/\\") != std::string::npos || aoi.id == risk::kRegional) {
        throw InputError("config: invalid AOI id '" + aoi.id + "'");
      }
      if (!ids.insert(aoi.id).second) throw InputError("config: duplicate AOI id '" + aoi.id + "'");
      for (const auto* p : {&aoi.rasters, &aoi.parcels, &aoi.panoramas}) {
        if (p->empty()) continue;
        if (!paths.insert(c.resolve(*p)).second) throw InputError("config: path '" + *p + "' is referenced twice");
      }
      c.aois.push_back(std::move(aoi));
    }
    if (c.aois.empty()) throw InputError("config: at least one AOI is required");
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  json doc;
  try {
    doc = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
  const auto dir = fs::path(path).parent_path().string();
  return parse_config(doc, dir.empty() ? "." : dir);
}

void select_aois(RunConfig& config, const std::vector<std::string>& ids) {
  for (const auto& id : ids) {
    const bool known = std::any_of(config.aois.begin(), config.aois.end(), [&](const AoiConfig& a) { return a.id == id; });
    if (!known) throw InputError("unknown AOI '" + id + "'");
  }
  config.selected = ids;
}

std::vector<features::ParcelRecord> read_parcels(const std::string& path, const std::string& aoi_id) {
  const auto t = io::CsvTable::read(path);
  const bool has_aoi = t.has_column("aoi_id");
  const bool has_street = t.has_column("street_name");
  std::vector<features::ParcelRecord> out;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    features::ParcelRecord p;
    p.parcel_id = t.at(r, "parcel_id");
    if (p.parcel_id.empty()) throw ParseError(t.line_of(r), path + ": empty parcel_id");
    if (!seen.insert(p.parcel_id).second) {
      throw ParseError(t.line_of(r), path + ": duplicate parcel_id '" + p.parcel_id + "'");
    }
    if (has_aoi && !t.at(r, "aoi_id").empty() && t.at(r, "aoi_id") != aoi_id) {
      throw ParseError(t.line_of(r), path + ": parcel belongs to AOI '" + t.at(r, "aoi_id") + "', not '" + aoi_id + "'");
    }
    p.aoi_id = aoi_id;
    p.centroid = {t.number(r, "lat"), t.number(r, "lon")};
    if (!p.centroid.valid()) throw ParseError(t.line_of(r), path + ": invalid centroid");
    if (has_street) p.street_name = t.at(r, "street_name");
    p.assessed_value_usd = t.number(r, "assessed_value_usd");
    if (!(p.assessed_value_usd >= 0.0) || !std::isfinite(p.assessed_value_usd)) {
      throw ParseError(t.line_of(r), path + ": assessed_value_usd must be a non-negative number");
    }
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace {

void log(const std::string& msg) { fmt::print(stderr, "floodline: {}\n", msg); }

std::string pct(std::size_t part, std::size_t total) {
  return io::fmt_fixed(total == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(total), 1);
}

std::string flag(bool b) { return b ? "1" : "0"; }

bool parse_flag(const io::CsvTable& t, std::size_t r, std::string_view col) {
  const auto& s = t.at(r, col);
  if (s == "1") return true;
  if (s == "0") return false;
  throw ParseError(t.line_of(r), "column '" + std::string(col) + "' must be 0 or 1");
}

/// Per-AOI bookkeeping for the run manifest.
struct AoiRun {
  std::vector<std::string> inputs;   ///< absolute paths
  std::vector<std::string> outputs;  ///< absolute paths
};

std::string relative_to(const std::string& path, const std::string& base) {
  return fs::path(path).lexically_normal().lexically_relative(fs::path(base).lexically_normal()).generic_string();
}

bool is_within(const std::string& path, const std::string& dir) {
  const auto rel = relative_to(path, dir);
  return !rel.empty() && rel != "." && rel.rfind("..", 0) != 0;
}

/// Keys are relative to `base`. Paths under `out_base` (upstream stage
/// outputs) are keyed "out/<relative path>" instead, so the manifest does not
/// depend on where the output directory lives.
json digests(const std::vector<std::string>& paths, const std::string& base, const std::string& out_base = {}) {
  json out = json::object();
  for (const auto& p : paths) {
    if (p.empty()) continue;
    const std::string key =
        !out_base.empty() && is_within(p, out_base) ? "out/" + relative_to(p, out_base) : relative_to(p, base);
    out[key] = fs::exists(p) ? io::sha256_file(p) : std::string("absent");
  }
  return out;
}

void update_manifest(const RunConfig& config, const std::string& stage, const json& aoi_entries,
                     const std::vector<std::string>& shared_outputs) {
  const auto path = config.out_path(files::kManifest);
  json doc = json::object();
  if (fs::exists(path)) {
    try {
      doc = json::parse(io::read_file(path));
    } catch (const json::exception&) {
      doc = json::object();
    }
  }
  // A changed configuration invalidates every stage recorded so far.
  if (doc.value("config_hash", std::string{}) != config.hash()) doc = json::object();
  doc["format"] = "floodline-run/1";
  doc["config_hash"] = config.hash();
  doc["rng_seed"] = config.rng_seed;
  auto& st = doc["stages"][stage];
  for (const auto& [id, entry] : aoi_entries.items()) st["aois"][id] = entry;
  if (!shared_outputs.empty()) st["outputs"] = digests(shared_outputs, config.resolve(config.output_dir));
  io::write_atomic(path, doc.dump(1) + "\n");
}

/// Runs `body` for every selected AOI. Stage failures are collected so the
/// remaining AOIs still run; input errors abort immediately.
void run_stage(const RunConfig& config, const std::string& stage,
               const std::function<void(const AoiConfig&, AoiRun&)>& body,
               const std::function<std::vector<std::string>()>& finish = {}) {
  json entries = json::object();
  std::vector<std::string> failures;
  const auto out_base = config.resolve(config.output_dir);
  for (const auto& aoi : config.aois) {
    if (!config.is_selected(aoi.id)) continue;
    AoiRun run;
    json entry;
    try {
      body(aoi, run);
      entry["status"] = "ok";
    } catch (const StageError& e) {
      entry["status"] = "failed";
      entry["message"] = e.what();
      failures.push_back(e.what());
      log(fmt::format("{}: AOI {} failed: {}", stage, aoi.id, e.what()));
    }
    entry["inputs"] = digests(run.inputs, config.base_dir, out_base);
    entry["outputs"] = digests(run.outputs, out_base);
    entries[aoi.id] = std::move(entry);
  }
  std::vector<std::string> shared;
  if (finish) shared = finish();
  update_manifest(config, stage, entries, shared);
  if (!failures.empty()) {
    std::string msg = stage + " failed for " + std::to_string(failures.size()) + " AOI(s)";
    for (const auto& f : failures) msg += "; " + f;
    throw StageError(msg);
  }
}

std::string require(const std::string& path, const std::string& aoi, const std::string& what) {
  if (!fs::exists(path)) throw StageError("AOI " + aoi + ": missing " + what + " (" + path + ")");
  return path;
}

raster::LayerSet load_layers(const AoiConfig& aoi, const std::string& path) {
  try {
    return raster::LayerSet::load(path);
  } catch (const StageError& e) {
    throw StageError("AOI " + aoi.id + ": " + e.what());
  }
}

std::vector<std::string> layer_paths(const std::string& manifest) {
  std::vector<std::string> out{manifest};
  for (const auto& [name, spec] : raster::read_manifest(manifest)) out.push_back(spec.path);
  return out;
}

/// Flood-layer reading at a parcel: the raw neighborhood mean in layer
/// units, and the flood surface elevation in meters.
struct FloodSample {
  std::optional<double> raw;
  std::optional<double> surface_m;
};

FloodSample flood_sample(const raster::LayerSet& layers, const geo::GeoPoint& p, std::optional<double> dem_m) {
  FloodSample s;
  const auto& g = layers.grid(raster::kFathom);
  s.raw = raster::neighborhood_mean(g, p.lon, p.lat).value;
  if (!s.raw) return s;
  const double m = raster::to_meters(*s.raw, g.units);
  if (layers.flood_semantic() == raster::FloodSemantic::surface_elevation) {
    s.surface_m = m;
  } else if (dem_m) {
    s.surface_m = m + *dem_m;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Stage 1 outputs

struct EstimateRow {
  std::string parcel_id;
  bool has_imagery = false;
  bool door_visible = false;
  std::string status = "no_imagery";
  std::optional<double> lfe_m;
  std::optional<double> roadside_elev_m;
  std::optional<double> hdsl_m;
  std::optional<double> dem_m;

  bool accepted() const { return hdsl_m.has_value(); }
};

std::map<std::string, EstimateRow> read_estimates(const std::string& path) {
  const auto t = io::CsvTable::read(path);
  std::map<std::string, EstimateRow> out;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    EstimateRow e;
    e.parcel_id = t.at(r, "parcel_id");
    e.has_imagery = parse_flag(t, r, "has_imagery");
    e.door_visible = parse_flag(t, r, "door_visible");
    e.status = t.at(r, "screen_status");
    e.lfe_m = t.optional_number(r, "lfe_m");
    e.roadside_elev_m = t.optional_number(r, "roadside_elev_m");
    e.hdsl_m = t.optional_number(r, "hdsl_m");
    e.dem_m = t.optional_number(r, "dem_elev_m");
    out[e.parcel_id] = e;
  }
  return out;
}

const EstimateRow& estimate_for(const std::map<std::string, EstimateRow>& est, const features::ParcelRecord& p,
                                const std::string& aoi) {
  const auto it = est.find(p.parcel_id);
  if (it == est.end()) {
    throw StageError("AOI " + aoi + ": parcel " + p.parcel_id + " has no extraction estimate; rerun extract");
  }
  return it->second;
}

void extract_aoi(const RunConfig& config, const AoiConfig& aoi, AoiRun& run) {
  const auto parcels_path = config.resolve(aoi.parcels);
  const auto raster_path = config.resolve(aoi.rasters);
  const auto pano_path = config.resolve(aoi.panoramas);
  run.inputs = {parcels_path, pano_path};
  for (const auto& p : layer_paths(raster_path)) run.inputs.push_back(p);

  const auto parcels = read_parcels(parcels_path, aoi.id);
  const auto layers = load_layers(aoi, raster_path);

  std::map<std::string, panorama::PanoramaRecord> records;
  if (!pano_path.empty()) {
    const auto base = fs::path(pano_path).parent_path().string();
    std::set<std::string> known;
    for (const auto& p : parcels) known.insert(p.parcel_id);
    std::size_t orphans = 0;
    for (auto& r : panorama::read_panorama_records(pano_path, base.empty() ? "." : base)) {
      if (!known.count(r.parcel_id)) {
        ++orphans;
        continue;
      }
      const auto id = r.parcel_id;
      if (!records.emplace(id, std::move(r)).second) {
        throw InputError(pano_path + ": more than one panorama for parcel '" + id + "'");
      }
    }
    if (orphans) log(fmt::format("extract: AOI {}: {} panorama(s) reference unknown parcels", aoi.id, orphans));
  }

  // Depth grids are decoded once per file; panoramas may share one.
  std::map<std::string, depth::DepthMatrix> depth_cache;
  for (const auto& [id, r] : records) {
    if (!depth_cache.count(r.depth_file)) depth_cache.emplace(r.depth_file, depth::read_depth_file(r.depth_file));
  }

  const std::size_t n = parcels.size();
  std::vector<EstimateRow> rows(n);
  std::vector<std::exception_ptr> errors(n);
  const bool parallel = config.threads > 1;
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const auto& p = parcels[i];
      EstimateRow& e = rows[i];
      e.parcel_id = p.parcel_id;
      e.dem_m = layers.point_m(raster::kDem, p.centroid.lon, p.centroid.lat);
      const auto it = records.find(p.parcel_id);
      if (it == records.end()) continue;
      const auto& r = it->second;
      panorama::PanoramaObservation obs;
      obs.parcel_id = r.parcel_id;
      obs.camera = r.camera;
      obs.camera_elev_m = r.camera_elev_m;
      obs.yaw_deg = r.yaw_deg;
      obs.width_px = r.width_px;
      obs.height_px = r.height_px;
      obs.acquired = r.acquired;
      obs.depth = depth_cache.at(r.depth_file);
      obs.door_mask = panorama::read_mask_file(r.door_mask_file);
      obs.roadside_mask = panorama::read_mask_file(r.roadside_mask_file);
      obs.structure_detected = r.structure_detected;
      try {
        obs.validate();
      } catch (const InputError& err) {
        throw InputError(pano_path + ": parcel " + p.parcel_id + ": " + err.what());
      }
      const auto est = panorama::evaluate(obs, p.centroid, e.dem_m);
      e.has_imagery = true;
      e.door_visible = est.door_visible;
      e.status = std::string(panorama::to_string(est.screen_status));
      if (est.screen_status == panorama::ScreenStatus::accepted) {
        e.lfe_m = est.lfe_m;
        e.roadside_elev_m = est.roadside_elev_m;
        e.hdsl_m = est.hdsl_m;
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }

  io::CsvWriter est({"parcel_id", "has_imagery", "door_visible", "screen_status", "lfe_m", "roadside_elev_m", "hdsl_m",
                     "dem_elev_m"});
  std::size_t with_imagery = 0, with_door = 0, with_lfe = 0;
  for (const auto& e : rows) {
    with_imagery += e.has_imagery;
    with_door += e.door_visible;
    with_lfe += e.accepted();
    est.row({e.parcel_id, flag(e.has_imagery), flag(e.door_visible), e.status, io::fmt_optional(e.lfe_m),
             io::fmt_optional(e.roadside_elev_m), io::fmt_optional(e.hdsl_m), io::fmt_optional(e.dem_m)});
  }
  io::CsvWriter cov({"aoi_id", "total", "with_imagery", "with_imagery_pct", "with_door", "with_door_pct",
                     "with_lfe_hdsl", "with_lfe_hdsl_pct"});
  cov.row({aoi.id, std::to_string(n), std::to_string(with_imagery), pct(with_imagery, n), std::to_string(with_door),
           pct(with_door, n), std::to_string(with_lfe), pct(with_lfe, n)});

  const auto dir = config.aoi_dir(aoi.id);
  run.outputs = {join(dir, files::kEstimates), join(dir, files::kCoverage)};
  io::write_atomic(run.outputs[0], est.str());
  io::write_atomic(run.outputs[1], cov.str());
  log(fmt::format("extract: AOI {}: {} parcels, {} with imagery, {} with door, {} with LFE/HDSL", aoi.id, n,
                  with_imagery, with_door, with_lfe));
}

// ---------------------------------------------------------------------------
// Stage 2

std::string opt_text(const std::optional<double>& v) { return io::fmt_optional(v); }

void write_search_log(const std::string& path, const ml::WorkflowResult& res) {
  io::CsvWriter w({"cell", "outlier_config", "algo", "applicable", "iteration", "hyperparameters", "n_train",
                   "rmse_m", "r2_holdout", "r2_cv", "gap", "cell_best"});
  auto emit = [&](const std::string& cell, const ml::Candidate& c, std::size_t iter, bool best) {
    w.row({cell, c.outlier.label(), std::string(ml::to_string(c.hyper.algo)), "1", std::to_string(iter),
           c.hyper.describe(), std::to_string(c.n_train), io::fmt_double(c.holdout.rmse), opt_text(c.holdout.r2),
           opt_text(c.r2_cv), opt_text(c.gap), flag(best)});
  };
  for (std::size_t ci = 0; ci < res.cells.size(); ++ci) {
    const auto& cell = res.cells[ci];
    if (!cell.applicable) {
      w.row({std::to_string(ci), cell.outlier.label(), std::string(ml::to_string(cell.algo)), "0", "", cell.skipped_reason,
             "", "", "", "", "", "0"});
      continue;
    }
    for (std::size_t i = 0; i < cell.evaluated.size(); ++i) {
      emit(std::to_string(ci), cell.evaluated[i], i, cell.best && *cell.best == i);
    }
  }
  for (std::size_t i = 0; i < res.batch_candidates.size(); ++i) {
    const auto& c = res.batch_candidates[i];
    emit("batch", c, i, c.r2_cv.has_value());
  }
  io::write_atomic(path, w.str());
}

void impute_aoi(const RunConfig& config, const AoiConfig& aoi, AoiRun& run) {
  const auto dir = config.aoi_dir(aoi.id);
  const auto est_path = require(join(dir, files::kEstimates), aoi.id, "extract output");
  const auto parcels_path = config.resolve(aoi.parcels);
  const auto raster_path = config.resolve(aoi.rasters);
  run.inputs = {parcels_path};
  for (const auto& p : layer_paths(raster_path)) run.inputs.push_back(p);

  const auto parcels = read_parcels(parcels_path, aoi.id);
  const auto estimates = read_estimates(est_path);
  const auto layers = load_layers(aoi, raster_path);

  std::vector<geo::GeoPoint> centroids;
  std::vector<std::string> train_streets;
  for (const auto& p : parcels) {
    centroids.push_back(p.centroid);
    if (estimate_for(estimates, p, aoi.id).accepted()) train_streets.push_back(p.street_name);
  }
  const auto box = features::BoundingBox::of(centroids);
  const features::StreetEncoder encoder(train_streets);

  ml::Dataset training;
  ml::Dataset prediction;
  training.x = ml::Matrix(0, features::kNumFeatures);
  prediction.x = ml::Matrix(0, features::kNumFeatures);
  std::vector<std::string> fheader{"parcel_id", "role"};
  for (auto name : features::kFeatureNames) fheader.emplace_back(name);
  fheader.emplace_back("hdsl_m");
  io::CsvWriter feat(fheader);
  io::CsvWriter drops({"parcel_id", "reason"});

  for (const auto& p : parcels) {
    const auto& e = estimate_for(estimates, p, aoi.id);
    features::LayerSamples s;
    s.hand_m = layers.point_m(raster::kHand, p.centroid.lon, p.centroid.lat);
    s.d2stream_so0_m = layers.point_m(raster::kStreamAny, p.centroid.lon, p.centroid.lat);
    s.d2stream_so4_m = layers.point_m(raster::kStreamOrder4, p.centroid.lon, p.centroid.lat);
    s.elevation_m = layers.point_m(raster::kDem, p.centroid.lon, p.centroid.lat);
    s.flood_surface_m = flood_sample(layers, p.centroid, s.elevation_m).surface_m;
    const auto fv = features::build_features(p, s, e.door_visible, encoder, box);
    if (!fv) {
      drops.row({p.parcel_id, "incomplete_features"});
      continue;
    }
    std::vector<std::string> cells{p.parcel_id, e.accepted() ? "train" : "predict"};
    for (double v : *fv) cells.push_back(io::fmt_double(v));
    cells.push_back(io::fmt_optional(e.hdsl_m));
    feat.row(cells);
    ml::Dataset& target = e.accepted() ? training : prediction;
    target.x.append_row(*fv);
    target.y.push_back(e.hdsl_m.value_or(0.0));
    target.ids.push_back(p.parcel_id);
  }

  ml::WorkflowOptions opts;
  opts.mode = aoi.workflow;
  opts.n_iter = config.n_iter;
  opts.k_folds = config.k_folds;
  opts.gate_threshold = config.gate_threshold;
  opts.tie_window = config.tie_window;
  opts.exec = config.threads > 1 ? ml::Execution::parallel : ml::Execution::serial;
  const RngStream stream = RngStream(config.rng_seed).child("impute").child(aoi.id);
  const auto res = ml::run_workflow(aoi.id, training, prediction, opts, stream);
  for (const auto& id : res.cleaned_out) drops.row({id, "target_out_of_range"});

  std::map<std::string, const ml::Prediction*> predicted;
  for (const auto& pr : res.predictions) predicted[pr.parcel_id] = &pr;

  io::CsvWriter merged({"parcel_id", "hdsl_source", "hdsl_m", "clamped"});
  std::vector<double> extracted_vals;
  std::vector<double> imputed_vals;
  for (const auto& p : parcels) {
    const auto& e = estimate_for(estimates, p, aoi.id);
    if (e.accepted()) {
      // Extracted values always take precedence over model output.
      merged.row({p.parcel_id, "extracted", io::fmt_double(*e.hdsl_m), "0"});
      extracted_vals.push_back(*e.hdsl_m);
    } else if (const auto it = predicted.find(p.parcel_id); it != predicted.end()) {
      merged.row({p.parcel_id, "imputed", io::fmt_double(it->second->hdsl_m), flag(it->second->clamped)});
      imputed_vals.push_back(it->second->hdsl_m);
    } else {
      merged.row({p.parcel_id, "missing", "", "0"});
    }
  }

  const auto& rep = res.report;
  auto mean_of = [](const std::vector<double>& v) { return v.empty() ? std::optional<double>{} : stats::mean(v); };
  auto sd_of = [](const std::vector<double>& v) { return v.empty() ? std::optional<double>{} : stats::stddev(v); };
  const auto me = mean_of(extracted_vals);
  const auto mi = mean_of(imputed_vals);
  std::optional<double> mean_gap;
  if (me && mi) mean_gap = std::abs(*mi - *me);

  io::CsvWriter report({"aoi_id", "workflow", "algo", "hyperparameters", "outlier_config", "n_train", "rmse_m",
                        "rmse_pct", "r2", "r2_cv", "gap", "gate_passed", "n_predicted", "n_clamped", "n_extracted",
                        "mean_extracted_m", "sd_extracted_m", "mean_imputed_m", "sd_imputed_m",
                        "abs_mean_diff_m", "note"});
  const bool has_choice = rep.chosen.has_value();
  report.row({aoi.id, std::string(ml::to_string(rep.workflow)),
              has_choice ? std::string(ml::to_string(rep.chosen->hyper.algo)) : "",
              has_choice ? rep.chosen->hyper.describe() : "", has_choice ? rep.chosen->outlier.label() : "",
              std::to_string(rep.n_train), has_choice ? io::fmt_double(rep.rmse_m) : "", opt_text(rep.rmse_pct),
              opt_text(rep.r2), opt_text(rep.r2_cv), opt_text(rep.gap), flag(rep.gate_passed),
              std::to_string(rep.n_predicted), std::to_string(rep.n_clamped), std::to_string(extracted_vals.size()),
              opt_text(me), opt_text(sd_of(extracted_vals)), opt_text(mi), opt_text(sd_of(imputed_vals)),
              opt_text(mean_gap), rep.note});

  run.inputs.push_back(est_path);
  run.outputs = {join(dir, files::kFeatures), join(dir, files::kModelReport), join(dir, files::kSearchLog),
                 join(dir, files::kMerged), join(dir, files::kImputeDrops)};
  io::write_atomic(run.outputs[0], feat.str());
  io::write_atomic(run.outputs[1], report.str());
  write_search_log(run.outputs[2], res);
  io::write_atomic(run.outputs[3], merged.str());
  io::write_atomic(run.outputs[4], drops.str());
  const auto model_path = join(dir, files::kModel);
  if (res.model) {
    ml::save_model(model_path, *res.model, rep);
    run.outputs.push_back(model_path);
  } else {
    fs::remove(model_path);
  }

  log(fmt::format("impute: AOI {}: train={} r2_cv={} gate={} imputed={}{}", aoi.id, rep.n_train,
                  rep.r2_cv ? io::fmt_fixed(*rep.r2_cv, 4) : "n/a", rep.gate_passed ? "passed" : "failed",
                  rep.n_predicted,
                  mean_gap ? fmt::format(" |mean(imputed)-mean(extracted)|={} m", io::fmt_fixed(*mean_gap, 4)) : ""));
}

// ---------------------------------------------------------------------------
// Stage 3

risk::Category parse_category(const std::string& s) {
  for (auto c : {risk::Category::flooded, risk::Category::clearance, risk::Category::in_extent_no_lfe,
                 risk::Category::outside_extent}) {
    if (risk::to_string(c) == s) return c;
  }
  throw InputError("unknown category '" + s + "'");
}

const std::vector<std::string> kAssessmentHeader = {
    "parcel_id",     "aoi_id",        "lat",             "lon",      "hdsl_source",     "hdsl_m",
    "street_elev_m", "fathom_elev_m", "fathom_positive", "fdis_m",   "damage_fraction", "loss_usd",
    "assessed_value_usd", "category"};

std::vector<std::string> assessment_row(const risk::AssessmentRecord& r) {
  return {r.parcel_id,
          r.aoi_id,
          io::fmt_double(r.centroid.lat),
          io::fmt_double(r.centroid.lon),
          std::string(features::to_string(r.hdsl_source)),
          io::fmt_optional(r.hdsl_m),
          io::fmt_optional(r.street_elev_m),
          io::fmt_optional(r.fathom_elev_m),
          flag(r.fathom_positive),
          io::fmt_optional(r.fdis_m),
          io::fmt_double(r.damage_fraction),
          io::fmt_double(r.loss_usd),
          io::fmt_double(r.assessed_value_usd),
          std::string(risk::to_string(r.category))};
}

std::vector<risk::AssessmentRecord> read_assessment(const std::string& path) {
  const auto t = io::CsvTable::read(path);
  std::vector<risk::AssessmentRecord> out;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    risk::AssessmentRecord r;
    r.parcel_id = t.at(i, "parcel_id");
    r.aoi_id = t.at(i, "aoi_id");
    r.centroid = {t.number(i, "lat"), t.number(i, "lon")};
    r.hdsl_source = features::parse_hdsl_source(t.at(i, "hdsl_source"));
    r.hdsl_m = t.optional_number(i, "hdsl_m");
    r.street_elev_m = t.optional_number(i, "street_elev_m");
    r.fathom_elev_m = t.optional_number(i, "fathom_elev_m");
    r.fathom_positive = parse_flag(t, i, "fathom_positive");
    r.fdis_m = t.optional_number(i, "fdis_m");
    r.damage_fraction = t.number(i, "damage_fraction");
    r.loss_usd = t.number(i, "loss_usd");
    r.assessed_value_usd = t.number(i, "assessed_value_usd");
    r.category = parse_category(t.at(i, "category"));
    out.push_back(std::move(r));
  }
  return out;
}

json geojson(const std::vector<risk::AssessmentRecord>& records) {
  json features = json::array();
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  for (const auto& r : records) {
    json props = {{"parcel_id", r.parcel_id},
                  {"aoi_id", r.aoi_id},
                  {"hdsl_source", std::string(features::to_string(r.hdsl_source))},
                  {"hdsl_m", opt(r.hdsl_m)},
                  {"street_elev_m", opt(r.street_elev_m)},
                  {"fathom_elev_m", opt(r.fathom_elev_m)},
                  {"fdis_m", opt(r.fdis_m)},
                  {"damage_fraction", r.damage_fraction},
                  {"loss_usd", r.loss_usd},
                  {"assessed_value_usd", r.assessed_value_usd},
                  {"category", std::string(risk::to_string(r.category))}};
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Point"}, {"coordinates", {r.centroid.lon, r.centroid.lat}}}},
                        {"properties", std::move(props)}});
  }
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

const std::vector<std::string> kSummaryHeader = {
    "aoi_id",           "total",         "flooded",          "flooded_pct",
    "clearance",        "clearance_pct", "in_extent_no_lfe", "in_extent_no_lfe_pct",
    "outside_extent",   "outside_extent_pct", "total_loss_usd", "median_loss_damaged_usd",
    "max_single_loss_usd", "median_fdis_flooded_m", "median_clearance_m", "value_at_risk_usd"};

std::vector<std::string> summary_row(const risk::Summary& s) {
  using risk::Category;
  std::vector<std::string> row{s.aoi_id, std::to_string(s.total)};
  for (auto c : {Category::flooded, Category::clearance, Category::in_extent_no_lfe, Category::outside_extent}) {
    row.push_back(std::to_string(s.count(c)));
    row.push_back(pct(s.count(c), s.total));
  }
  row.push_back(io::fmt_double(s.total_loss_usd));
  row.push_back(io::fmt_optional(s.median_loss_damaged));
  row.push_back(io::fmt_double(s.max_single_loss));
  row.push_back(io::fmt_optional(s.median_fdis_flooded));
  row.push_back(io::fmt_optional(s.median_clearance));
  row.push_back(io::fmt_double(s.value_at_risk_usd));
  return row;
}

void check_partition(const risk::Summary& s) {
  if (!s.partition_holds()) {
    throw StageError("summary for " + s.aoi_id + ": category counts do not partition the parcel total");
  }
}

void assess_aoi(const RunConfig& config, const AoiConfig& aoi, AoiRun& run) {
  const auto dir = config.aoi_dir(aoi.id);
  const auto est_path = require(join(dir, files::kEstimates), aoi.id, "extract output");
  const auto merged_path = require(join(dir, files::kMerged), aoi.id, "impute output");
  const auto parcels_path = config.resolve(aoi.parcels);
  const auto raster_path = config.resolve(aoi.rasters);
  run.inputs = {parcels_path};
  for (const auto& p : layer_paths(raster_path)) run.inputs.push_back(p);
  run.inputs.push_back(est_path);
  run.inputs.push_back(merged_path);

  const auto parcels = read_parcels(parcels_path, aoi.id);
  const auto estimates = read_estimates(est_path);
  const auto layers = load_layers(aoi, raster_path);

  std::map<std::string, std::pair<HdslSource, std::optional<double>>> merged;
  {
    const auto t = io::CsvTable::read(merged_path);
    for (std::size_t r = 0; r < t.rows(); ++r) {
      merged[t.at(r, "parcel_id")] = {features::parse_hdsl_source(t.at(r, "hdsl_source")),
                                      t.optional_number(r, "hdsl_m")};
    }
  }

  std::vector<double> values;
  for (const auto& p : parcels) values.push_back(p.assessed_value_usd);
  const auto vf = risk::value_filter(values);
  io::CsvWriter drops({"parcel_id", "assessed_value_usd", "p1", "p99", "reason"});
  for (auto i : vf.dropped) {
    const auto& p = parcels[i];
    drops.row({p.parcel_id, io::fmt_double(p.assessed_value_usd), io::fmt_double(vf.p1), io::fmt_double(vf.p99),
               p.assessed_value_usd < vf.p1 ? "value_below_p1" : "value_above_p99"});
  }

  std::vector<risk::AssessmentRecord> records;
  for (auto i : vf.kept) {
    const auto& p = parcels[i];
    const auto& e = estimate_for(estimates, p, aoi.id);
    const auto m = merged.find(p.parcel_id);
    if (m == merged.end()) throw StageError("AOI " + aoi.id + ": parcel " + p.parcel_id + " missing from merged HDSL");
    risk::AssessmentRecord r;
    r.parcel_id = p.parcel_id;
    r.aoi_id = aoi.id;
    r.centroid = p.centroid;
    r.assessed_value_usd = p.assessed_value_usd;
    r.hdsl_source = m->second.first;
    r.hdsl_m = m->second.second;
    if (r.hdsl_source == HdslSource::missing) r.hdsl_m.reset();
    const auto dem = layers.point_m(raster::kDem, p.centroid.lon, p.centroid.lat);
    // Roadside elevation from an accepted panorama wins over the DEM.
    r.street_elev_m = e.roadside_elev_m && e.accepted() ? e.roadside_elev_m : dem;
    const auto f = flood_sample(layers, p.centroid, dem);
    r.fathom_elev_m = f.surface_m;
    r.fathom_positive = f.raw && *f.raw > 0.0;
    risk::assess(r);
    records.push_back(std::move(r));
  }
  check_partition(risk::summarize(aoi.id, records));

  io::CsvWriter w(kAssessmentHeader);
  for (const auto& r : records) w.row(assessment_row(r));
  run.outputs = {join(dir, files::kAssessment), join(dir, files::kGeoJson), join(dir, files::kValueDrops)};
  io::write_atomic(run.outputs[0], w.str());
  io::write_atomic(run.outputs[1], geojson(records).dump(1) + "\n");
  io::write_atomic(run.outputs[2], drops.str());
  log(fmt::format("assess: AOI {}: {} assessed, {} dropped by value filter", aoi.id, records.size(),
                  vf.dropped.size()));
}

/// Summary and sensitivity files over every configured AOI with an assessment.
std::vector<std::string> write_risk_summaries(const RunConfig& config) {
  std::vector<risk::AssessmentRecord> all;
  for (const auto& aoi : config.aois) {
    const auto path = join(config.aoi_dir(aoi.id), files::kAssessment);
    if (!fs::exists(path)) continue;
    auto recs = read_assessment(path);
    all.insert(all.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  const auto summaries = risk::aggregate(all);
  double loss_sum = 0.0;
  std::size_t total_sum = 0;
  io::CsvWriter sw(kSummaryHeader);
  for (const auto& s : summaries) {
    check_partition(s);
    if (s.aoi_id != risk::kRegional) {
      loss_sum += s.total_loss_usd;
      total_sum += s.total;
    }
    sw.row(summary_row(s));
  }
  const auto& regional = summaries.back();
  if (regional.total_loss_usd != loss_sum || regional.total != total_sum) {
    throw StageError("regional totals differ from the sum of AOI totals");
  }

  io::CsvWriter sens({"aoi_id", "extracted_only_loss_usd", "combined_loss_usd", "loss_delta_usd",
                      "extracted_only_flooded", "combined_flooded", "extracted_only_in_extent_no_lfe",
                      "combined_in_extent_no_lfe"});
  for (const auto& row : risk::sensitivity(all)) {
    check_partition(row.extracted_only);
    check_partition(row.combined);
    if (row.combined.total_loss_usd < row.extracted_only.total_loss_usd) {
      throw StageError("sensitivity for " + row.combined.aoi_id + ": combined loss below extracted-only loss");
    }
    using risk::Category;
    sens.row({row.combined.aoi_id, io::fmt_double(row.extracted_only.total_loss_usd),
              io::fmt_double(row.combined.total_loss_usd), io::fmt_double(row.loss_delta_usd()),
              std::to_string(row.extracted_only.count(Category::flooded)),
              std::to_string(row.combined.count(Category::flooded)),
              std::to_string(row.extracted_only.count(Category::in_extent_no_lfe)),
              std::to_string(row.combined.count(Category::in_extent_no_lfe))});
  }
  const std::vector<std::string> out{config.out_path(files::kSummary), config.out_path(files::kSensitivity)};
  io::write_atomic(out[0], sw.str());
  io::write_atomic(out[1], sens.str());
  return out;
}

// ---------------------------------------------------------------------------
// Report

/// Fixed-width text table; the first column is left-aligned, the rest right-aligned.
std::string render(const std::string& title, const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& r) {
    std::string s;
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) s += "  ";
      s += c == 0 ? fmt::format("{:<{}}", r[c], width[c]) : fmt::format("{:>{}}", r[c], width[c]);
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  std::string out = title + "\n" + line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
  for (const auto& r : rows) out += line(r);
  return out + "\n";
}

std::string fixed_or_dash(const std::string& cell, int decimals) {
  if (cell.empty()) return "-";
  return io::fmt_fixed(std::stod(cell), decimals);
}

}  // namespace

// ---------------------------------------------------------------------------
// Stage entry points

void cmd_extract(const RunConfig& config) {
  run_stage(config, "extract", [&](const AoiConfig& aoi, AoiRun& run) { extract_aoi(config, aoi, run); });
}

void cmd_impute(const RunConfig& config) {
  run_stage(config, "impute", [&](const AoiConfig& aoi, AoiRun& run) { impute_aoi(config, aoi, run); });
}

void cmd_assess(const RunConfig& config) {
  run_stage(
      config, "assess", [&](const AoiConfig& aoi, AoiRun& run) { assess_aoi(config, aoi, run); },
      [&] { return write_risk_summaries(config); });
}

void cmd_report(const RunConfig& config) {
  // Coverage (one row per AOI plus the regional roll-up).
  std::vector<std::string> cov_header;
  std::vector<std::vector<std::string>> cov_rows;
  std::array<std::size_t, 4> totals{};
  for (const auto& aoi : config.aois) {
    const auto path = join(config.aoi_dir(aoi.id), files::kCoverage);
    if (!fs::exists(path)) continue;
    const auto t = io::CsvTable::read(path);
    cov_header = t.header();
    for (std::size_t r = 0; r < t.rows(); ++r) {
      std::vector<std::string> row;
      for (std::size_t c = 0; c < t.header().size(); ++c) row.push_back(t.at(r, c));
      const char* cols[] = {"total", "with_imagery", "with_door", "with_lfe_hdsl"};
      for (std::size_t k = 0; k < 4; ++k) totals[k] += static_cast<std::size_t>(t.number(r, cols[k]));
      cov_rows.push_back(std::move(row));
    }
  }
  if (cov_header.empty()) {
    cov_header = {"aoi_id", "total", "with_imagery", "with_imagery_pct", "with_door", "with_door_pct",
                  "with_lfe_hdsl", "with_lfe_hdsl_pct"};
  }
  cov_rows.push_back({std::string(risk::kRegional), std::to_string(totals[0]), std::to_string(totals[1]),
                      pct(totals[1], totals[0]), std::to_string(totals[2]), pct(totals[2], totals[0]),
                      std::to_string(totals[3]), pct(totals[3], totals[0])});
  io::CsvWriter t3(cov_header);
  for (const auto& r : cov_rows) t3.row(r);

  // Model performance. Gated-out AOIs stay in the table, marked EXCLUDED.
  const std::vector<std::string> t5_header{"aoi_id", "workflow", "algo", "outlier_config", "n_train", "rmse_m",
                                           "rmse_pct", "r2", "r2_cv", "gap", "status"};
  io::CsvWriter t5(t5_header);
  std::vector<std::vector<std::string>> t5_text;
  for (const auto& aoi : config.aois) {
    const auto path = join(config.aoi_dir(aoi.id), files::kModelReport);
    if (!fs::exists(path)) continue;
    const auto t = io::CsvTable::read(path);
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const auto r2 = t.optional_number(r, "r2");
      const auto r2cv = t.optional_number(r, "r2_cv");
      const std::string gap = r2 && r2cv ? io::fmt_double(*r2 - *r2cv) : "";
      const std::string status = t.at(r, "gate_passed") == "1" ? "SELECTED" : "EXCLUDED";
      std::vector<std::string> row{t.at(r, "aoi_id"), t.at(r, "workflow"), t.at(r, "algo"), t.at(r, "outlier_config"),
                                   t.at(r, "n_train"), t.at(r, "rmse_m"), t.at(r, "rmse_pct"), t.at(r, "r2"),
                                   t.at(r, "r2_cv"), gap, status};
      t5.row(row);
      t5_text.push_back({row[0], row[1], row[2].empty() ? "-" : row[2], row[3].empty() ? "-" : row[3], row[4],
                         fixed_or_dash(row[5], 3), fixed_or_dash(row[6], 1), fixed_or_dash(row[7], 3),
                         fixed_or_dash(row[8], 3), fixed_or_dash(row[9], 3), status});
    }
  }

  // Risk summaries (AOI rows plus regional, as written by the assess stage).
  io::CsvWriter t6(kSummaryHeader);
  std::vector<std::vector<std::string>> t6_text;
  const auto summary_path = config.out_path(files::kSummary);
  if (fs::exists(summary_path)) {
    const auto t = io::CsvTable::read(summary_path);
    for (std::size_t r = 0; r < t.rows(); ++r) {
      std::vector<std::string> row;
      for (std::size_t c = 0; c < t.header().size(); ++c) row.push_back(t.at(r, c));
      t6.row(row);
      t6_text.push_back({row[0], row[1], row[2] + " (" + row[3] + "%)", row[4] + " (" + row[5] + "%)",
                         row[6] + " (" + row[7] + "%)", row[8] + " (" + row[9] + "%)", fixed_or_dash(row[10], 0),
                         fixed_or_dash(row[11], 0), fixed_or_dash(row[12], 0), fixed_or_dash(row[13], 2),
                         fixed_or_dash(row[14], 2), fixed_or_dash(row[15], 0)});
    }
  }

  std::vector<std::vector<std::string>> sens_text;
  const auto sens_path = config.out_path(files::kSensitivity);
  if (fs::exists(sens_path)) {
    const auto t = io::CsvTable::read(sens_path);
    for (std::size_t r = 0; r < t.rows(); ++r) {
      sens_text.push_back({t.at(r, "aoi_id"), fixed_or_dash(t.at(r, "extracted_only_loss_usd"), 0),
                           fixed_or_dash(t.at(r, "combined_loss_usd"), 0), fixed_or_dash(t.at(r, "loss_delta_usd"), 0),
                           t.at(r, "extracted_only_flooded"), t.at(r, "combined_flooded")});
    }
  }

  std::string text = fmt::format("floodline run report (seed {}, config {})\n\n", config.rng_seed,
                                 config.hash().substr(0, 16));
  text += render("Coverage", {"AOI", "Total", "Imagery", "%", "Door", "%", "LFE/HDSL", "%"},
                 [&] {
                   std::vector<std::vector<std::string>> rows;
                   for (const auto& r : cov_rows) rows.push_back(r);
                   return rows;
                 }());
  text += render("Model performance", {"AOI", "Workflow", "Algo", "Outliers", "N", "RMSE m", "RMSE %", "R2", "R2 CV",
                                       "Gap", "Status"},
                 t5_text);
  text += render("Flood risk", {"AOI", "Total", "Flooded", "Clearance", "No LFE", "Outside", "Loss $",
                                "Median loss $", "Max loss $", "Median FDIS m", "Median clear m", "Value at risk $"},
                 t6_text);
  text += render("Sensitivity (extracted only vs. with imputed)",
                 {"AOI", "Extracted loss $", "Combined loss $", "Delta $", "Flooded (ext)", "Flooded (comb)"},
                 sens_text);

  const std::vector<std::string> outputs{config.out_path(files::kTable3), config.out_path(files::kTable5),
                                         config.out_path(files::kTable6), config.out_path(files::kReport)};
  io::write_atomic(outputs[0], t3.str());
  io::write_atomic(outputs[1], t5.str());
  io::write_atomic(outputs[2], t6.str());
  io::write_atomic(outputs[3], text);
  update_manifest(config, "report", json::object(), outputs);
}

}  // namespace floodline::pipeline
