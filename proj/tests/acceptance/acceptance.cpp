// Acceptance runner: one PASS/FAIL line per criterion.
//
//   floodline_acceptance <scratch-dir> [criterion ...]
//
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <omp.h>

#include <fmt/format.h>

#include "floodline/depth.hpp"
#include "floodline/ensemble.hpp"
#include "floodline/errors.hpp"
#include "floodline/geo.hpp"
#include "floodline/io.hpp"
#include "floodline/metrics.hpp"
#include "floodline/pipeline.hpp"
#include "floodline/raster.hpp"
#include "floodline/risk.hpp"
#include "floodline/synth.hpp"
#include "oracles.hpp"
#include "scratch.hpp"

namespace fs = std::filesystem;
using namespace floodline;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
  void note(const std::string& what) {
    if (pass) detail = what;
  }
};

fs::path g_scratch;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void run_pipeline(const std::string& config_path, int threads = 0) {
  auto cfg = pipeline::load_config(config_path);
  if (threads > 0) cfg.threads = threads;
  omp_set_num_threads(cfg.threads);
  pipeline::cmd_extract(cfg);
  pipeline::cmd_impute(cfg);
  pipeline::cmd_assess(cfg);
  pipeline::cmd_report(cfg);
}

fs::path synth_fixture(const std::string& name, synth::Params p) {
  const fs::path dir = scratch::fresh_dir(g_scratch, name);
  p.output_dir = dir.string();
  synth::cmd_synth(p);
  return dir;
}

std::map<std::string, std::size_t> index_by(const io::CsvTable& t, const std::string& col) {
  std::map<std::string, std::size_t> out;
  for (std::size_t r = 0; r < t.rows(); ++r) out[t.at(r, col)] = r;
  return out;
}

// ---------------------------------------------------------------------------

Outcome ddf_exactness() {
  Outcome o;
  double worst = 0.0;
  for (const auto& p : risk::kDepthDamageCurve) {
    worst = std::max(worst, std::abs(risk::ddf(p.depth_ft * 0.3048) - p.fraction));
  }
  if (worst > 1e-12) o.fail(fmt::format("control point error {:.3g}", worst));
  const double mid = risk::ddf(0.4572);
  if (mid != 0.277) o.fail(fmt::format("ddf(0.4572) = {:.17g}", mid));
  o.note(fmt::format("13 control points, max error {:.3g}; ddf(0.4572) = {:.17g}", worst, mid));
  return o;
}

Outcome ddf_floor_cap() {
  Outcome o;
  const double lo = risk::ddf(-0.70);
  const double hi = risk::ddf(5.5);
  if (lo != 0.0) o.fail(fmt::format("ddf(-0.70) = {}", lo));
  if (hi != 0.807) o.fail(fmt::format("ddf(5.5) = {}", hi));
  o.note("ddf(-0.70) = 0, ddf(5.5) = 0.807");
  return o;
}

Outcome geometry_oracle() {
  Outcome o;
  Pcg32 rng(20240601, 3);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const geo::GeoPoint a{rng.uniform(-85, 85), rng.uniform(-180, 180)};
    // Mix street-scale offsets with continental ones.
    const double scale = i % 2 ? 0.01 : 20.0;
    const geo::GeoPoint b{std::clamp(a.lat + rng.uniform(-scale, scale), -89.0, 89.0), a.lon + rng.uniform(-scale, scale)};
    if (a == b) continue;
    double d = std::abs(geo::bearing(a, b) - oracle::bearing_deg(a.lat, a.lon, b.lat, b.lon));
    d = std::min(d, 360.0 - d);
    worst = std::max(worst, d);
  }
  if (worst > 1e-9) o.fail(fmt::format("max bearing deviation {:.3g} deg", worst));
  for (int h : {256, 1024, 8192}) {
    if (geo::pitch_angle(h / 2, h) != 0.0) o.fail(fmt::format("horizon pitch nonzero at height {}", h));
    if (geo::pitch_angle(0, h) != 90.0) o.fail(fmt::format("top-row pitch not 90 at height {}", h));
  }
  o.note(fmt::format("10000 pairs, max deviation {:.3g} deg; horizon 0, top row +90", worst));
  return o;
}

Outcome synthetic_recovery() {
  Outcome o;
  synth::Params p;
  p.seed = 404;
  p.n_iter = 2;
  p.k_folds = 5;
  synth::AoiParams a;
  a.id = "REC";
  a.n_parcels = 500;
  a.sigma = 0.0;
  a.coverage = 1.0;
  a.door_visibility = 1.0;
  a.workflow = ml::WorkflowMode::batch_standard;
  p.aois = {a};
  const auto dir = synth_fixture("recovery", p);
  const auto t0 = std::chrono::steady_clock::now();
  run_pipeline((dir / "config.json").string());
  const double secs = seconds_since(t0);

  const auto truth = io::CsvTable::read((dir / "REC" / "truth.csv").string());
  const auto est = io::CsvTable::read((dir / "out" / "REC" / pipeline::files::kEstimates).string());
  const auto est_row = index_by(est, "parcel_id");
  double worst = 0.0;
  for (std::size_t r = 0; r < truth.rows(); ++r) {
    const auto it = est_row.find(truth.at(r, "parcel_id"));
    if (it == est_row.end() || est.at(it->second, "screen_status") != "accepted") {
      o.fail("parcel " + truth.at(r, "parcel_id") + " not extracted");
      continue;
    }
    worst = std::max(worst, std::abs(est.number(it->second, "hdsl_m") - truth.number(r, "hdsl_m")));
  }
  if (worst > 1e-6) o.fail(fmt::format("max HDSL error {:.3g} m", worst));

  // Spot parcels: flood depth and loss from the raw flood raster and truth.
  const auto fathom = raster::read_grid_file((dir / "REC" / "rasters" / "fathom_100yr.asc").string(), raster::Units::feet);
  const auto parcels = io::CsvTable::read((dir / "REC" / "parcels.csv").string());
  const auto parcel_row = index_by(parcels, "parcel_id");
  const auto assessed = io::CsvTable::read((dir / "out" / "REC" / pipeline::files::kAssessment).string());
  std::vector<std::size_t> flooded, dry;
  for (std::size_t r = 0; r < assessed.rows(); ++r) {
    const auto cat = assessed.at(r, "category");
    if (cat == "flooded") flooded.push_back(r);
    if (cat == "clearance") dry.push_back(r);
  }
  std::vector<std::size_t> spots;
  for (std::size_t i = 0; i < 5 && i < flooded.size(); ++i) spots.push_back(flooded[i * flooded.size() / 5]);
  for (std::size_t i = 0; spots.size() < 10 && i < dry.size(); ++i) spots.push_back(dry[i * dry.size() / 5]);
  if (spots.size() < 10) o.fail(fmt::format("only {} flooded and {} clearance parcels", flooded.size(), dry.size()));

  const auto truth_row = index_by(truth, "parcel_id");
  double fdis_err = 0.0;
  double loss_err = 0.0;
  for (auto r : spots) {
    const auto id = assessed.at(r, "parcel_id");
    const auto t = truth_row.at(id);
    const auto pr = parcel_row.at(id);
    const auto raw = oracle::neighborhood_mean(fathom, parcels.number(pr, "lon"), parcels.number(pr, "lat"));
    if (!raw) {
      o.fail("oracle finds no flood sample for " + id);
      continue;
    }
    const double surface = *raw * 0.3048;
    const double depth = surface - (truth.number(t, "street_elev_m") + truth.number(t, "hdsl_m"));
    const double value = parcels.number(pr, "assessed_value_usd");
    const double want_loss = depth > 0 ? value * oracle::damage_fraction(depth) : 0.0;
    fdis_err = std::max(fdis_err, std::abs(assessed.number(r, "fdis_m") - depth));
    loss_err = std::max(loss_err, std::abs(assessed.number(r, "loss_usd") - want_loss) / std::max(1.0, want_loss));
  }
  if (fdis_err > 1e-6) o.fail(fmt::format("spot FDIS error {:.3g} m", fdis_err));
  if (loss_err > 1e-6) o.fail(fmt::format("spot loss relative error {:.3g}", loss_err));
  if (secs >= 30.0) o.fail(fmt::format("pipeline took {:.1f} s", secs));
  o.note(fmt::format("500 parcels, max HDSL error {:.2g} m; 10 spots FDIS err {:.2g} m, loss rel err {:.2g}; {:.1f} s",
                     worst, fdis_err, loss_err, secs));
  return o;
}

Outcome imputation_recovery() {
  Outcome o;
  synth::Params p;
  p.seed = 11;
  p.n_iter = 30;
  p.k_folds = 5;
  synth::AoiParams a;
  a.id = "IMP";
  a.n_parcels = 1000;
  a.coverage = 0.5;
  a.door_visibility = 1.0;
  a.sigma = 0.0;
  a.workflow = ml::WorkflowMode::tuning_extended;
  p.aois = {a};
  const auto dir = synth_fixture("imputation", p);
  auto cfg = pipeline::load_config((dir / "config.json").string());
  omp_set_num_threads(cfg.threads);
  pipeline::cmd_extract(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  pipeline::cmd_impute(cfg);
  const double secs = seconds_since(t0);

  const auto report = io::CsvTable::read((dir / "out" / "IMP" / pipeline::files::kModelReport).string());
  const auto r2cv = report.optional_number(0, "r2_cv");
  if (!r2cv || *r2cv < 0.99) o.fail(fmt::format("r2_cv = {}", r2cv ? fmt::format("{:.4f}", *r2cv) : "none"));
  if (report.at(0, "gate_passed") != "1") o.fail("gate failed");

  const auto truth = io::CsvTable::read((dir / "IMP" / "truth.csv").string());
  const auto truth_row = index_by(truth, "parcel_id");
  const auto merged = io::CsvTable::read((dir / "out" / "IMP" / pipeline::files::kMerged).string());
  double ss = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < merged.rows(); ++r) {
    if (merged.at(r, "hdsl_source") != "imputed") continue;
    const double e = merged.number(r, "hdsl_m") - truth.number(truth_row.at(merged.at(r, "parcel_id")), "hdsl_m");
    ss += e * e;
    ++n;
  }
  const double rmse = n ? std::sqrt(ss / static_cast<double>(n)) : INFINITY;
  if (n == 0) o.fail("no imputed parcels");
  if (rmse > 0.05) o.fail(fmt::format("imputed RMSE {:.4f} m", rmse));
  if (secs >= 300.0) o.fail(fmt::format("imputation took {:.0f} s", secs));
  o.note(fmt::format("r2_cv {:.4f}, {} imputed parcels, RMSE vs truth {:.4f} m; {:.0f} s", r2cv.value_or(NAN), n, rmse,
                     secs));
  return o;
}

Outcome gating() {
  Outcome o;
  synth::Params p;
  p.seed = 77;
  p.n_iter = 10;
  p.k_folds = 5;
  synth::AoiParams a;
  a.id = "NOISE";
  a.n_parcels = 240;
  a.model = synth::HdslModel::noise;
  a.coverage = 0.5;
  a.door_visibility = 1.0;
  a.workflow = ml::WorkflowMode::tuning_extended;
  p.aois = {a};
  const auto dir = synth_fixture("gating", p);
  const auto t0 = std::chrono::steady_clock::now();
  bool stage_failed = false;
  try {
    run_pipeline((dir / "config.json").string());
  } catch (const StageError& e) {
    stage_failed = true;
    o.fail(e.what());
  }
  const double secs = seconds_since(t0);
  if (stage_failed) return o;

  const auto out = dir / "out" / "NOISE";
  const auto report = io::CsvTable::read((out / pipeline::files::kModelReport).string());
  const auto r2cv = report.optional_number(0, "r2_cv");
  if (r2cv && *r2cv >= 0.15) o.fail(fmt::format("best r2_cv {:.4f}", *r2cv));
  if (report.at(0, "gate_passed") != "0") o.fail("gate passed");

  // Best over every searched candidate, not just the reported one.
  const auto log = io::CsvTable::read((out / pipeline::files::kSearchLog).string());
  double best = -INFINITY;
  for (std::size_t r = 0; r < log.rows(); ++r) {
    if (auto v = log.optional_number(r, "r2_cv")) best = std::max(best, *v);
  }
  if (best >= 0.15) o.fail(fmt::format("a searched candidate reached r2_cv {:.4f}", best));

  const auto merged = io::CsvTable::read((out / pipeline::files::kMerged).string());
  std::size_t imputed = 0;
  for (std::size_t r = 0; r < merged.rows(); ++r) imputed += merged.at(r, "hdsl_source") == "imputed";
  if (imputed != 0) o.fail(fmt::format("{} imputed values emitted", imputed));
  if (fs::exists(out / pipeline::files::kModel)) o.fail("model file written for a gated-out AOI");
  if (secs >= 120.0) o.fail(fmt::format("took {:.0f} s", secs));
  o.note(fmt::format("best r2_cv {:.4f} over {} candidates, gate_passed 0, 0 imputed; {:.0f} s", best, log.rows(), secs));
  return o;
}

Outcome ensemble_properties() {
  Outcome o;
  using namespace floodline::ml;
  std::size_t gb_checks = 0;
  for (int d = 0; d < 100; ++d) {
    Pcg32 rng(1000 + d, 1);
    const std::size_t n = 20 + rng.bounded(60);
    const std::size_t cols = 1 + rng.bounded(5);
    Matrix x(n, cols);
    std::vector<double> y(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < cols; ++c) x(r, c) = rng.uniform(-1, 1);
      y[r] = x(r, 0) * x(r, cols - 1) + rng.normal();
    }
    const ColumnOrder order(x);
    for (double eta : {0.05, 0.1, 0.3}) {
      TreeParams tp{static_cast<int>(1 + rng.bounded(4)), static_cast<int>(1 + rng.bounded(3)), 0};
      const auto b = fit_boosting(x, order, y, 30, eta, tp, RngStream(d));
      for (std::size_t m = 1; m < b.train_rmse.size(); ++m) {
        ++gb_checks;
        if (b.train_rmse[m] > b.train_rmse[m - 1]) {
          o.fail(fmt::format("dataset {} eta {} step {}: rmse rose", d, eta, m));
        }
      }
    }
  }

  std::size_t rf_queries = 0;
  for (int m = 0; m < 10; ++m) {
    Pcg32 rng(2000 + m, 2);
    Matrix x(60, 4);
    std::vector<double> y(60);
    for (std::size_t r = 0; r < 60; ++r) {
      for (std::size_t c = 0; c < 4; ++c) x(r, c) = rng.uniform(0, 5);
      y[r] = std::sin(x(r, 0)) * 3 + x(r, 2) + rng.normal();
    }
    const auto model = fit_model(x, y, {Algo::random_forest, 15, std::nullopt, 1, 2}, RngStream(m));
    for (int q = 0; q < 1000; ++q) {
      const std::vector<double> v = {rng.uniform(-2, 7), rng.uniform(-2, 7), rng.uniform(-2, 7), rng.uniform(-2, 7)};
      const auto each = model.tree_predictions(v);
      const double p = model.predict(v);
      ++rf_queries;
      if (p < *std::min_element(each.begin(), each.end()) || p > *std::max_element(each.begin(), each.end())) {
        o.fail("forest prediction outside tree range");
      }
    }
  }

  std::size_t partitions = 0;
  for (std::size_t n = 2; n <= 150; n += 7) {
    for (std::size_t k = 2; k <= std::min<std::size_t>(n, 10); ++k) {
      const auto folds = kfold_partition(n, k, RngStream(n * 100 + k));
      std::vector<int> seen(n, 0);
      std::size_t lo = n, hi = 0;
      for (const auto& f : folds) {
        lo = std::min(lo, f.size());
        hi = std::max(hi, f.size());
        for (auto i : f) ++seen[i];
      }
      ++partitions;
      if (folds.size() != k || hi - lo > 1 || !std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; })) {
        o.fail(fmt::format("bad partition n={} k={}", n, k));
      }
    }
  }
  o.note(fmt::format("{} GB steps non-increasing; {} RF queries within tree range; {} k-fold partitions exact",
                     gb_checks, rf_queries, partitions));
  return o;
}

Outcome determinism(fs::path& kept_output) {
  Outcome o;
  synth::Params p;
  p.seed = 2718;
  p.n_iter = 2;
  p.k_folds = 4;
  synth::AoiParams a;
  a.id = "DA";
  a.n_parcels = 160;
  a.coverage = 0.6;
  a.door_visibility = 0.8;
  a.workflow = ml::WorkflowMode::tuning_extended;
  synth::AoiParams b = a;
  b.id = "DB";
  b.n_parcels = 120;
  b.workflow = ml::WorkflowMode::batch_standard;
  b.center_lat = 29.75;
  b.flood_offset_m = 0.5;
  p.aois = {a, b};
  const auto dir = synth_fixture("determinism", p);

  auto with_output = [&](const std::string& out, int threads) {
    auto doc = nlohmann::json::parse(io::read_file((dir / "config.json").string()));
    doc["output_dir"] = out;
    doc["threads"] = threads;
    const auto path = dir / ("config_" + out + ".json");
    scratch::write_text(path, doc.dump(2));
    const auto t0 = std::chrono::steady_clock::now();
    run_pipeline(path.string());
    return seconds_since(t0);
  };
  const double t1 = with_output("run1", 1);
  with_output("run2", 1);
  const double tp = with_output("run_parallel", 4);

  const auto d1 = scratch::digest_tree(dir / "run1");
  const auto d2 = scratch::digest_tree(dir / "run2");
  const auto d3 = scratch::digest_tree(dir / "run_parallel");
  if (d1.empty()) o.fail("no outputs");
  if (d1 != d2) o.fail("serial reruns differ");
  if (d1 != d3) {
    for (const auto& [k, v] : d1) {
      auto it = d3.find(k);
      if (it == d3.end() || it->second != v) {
        o.fail("parallel run differs in " + k);
        break;
      }
    }
    o.fail("parallel run differs");
  }
  if (tp >= 2.0 * t1) o.fail(fmt::format("parallel run {:.1f} s vs serial {:.1f} s", tp, t1));
  kept_output = dir / "run1";
  o.note(fmt::format("{} files byte-identical across 2 serial runs and 1 run with 4 threads; {:.1f} s / {:.1f} s",
                     d1.size(), t1, tp));
  return o;
}

Outcome bookkeeping(const std::vector<fs::path>& outputs) {
  Outcome o;
  if (outputs.empty()) o.fail("no pipeline outputs to inspect (run criteria 4, 6 or 8 first)");
  std::size_t summaries = 0;
  for (const auto& out : outputs) {
    if (!fs::exists(out / pipeline::files::kSummary)) {
      o.fail("missing " + (out / pipeline::files::kSummary).string());
      continue;
    }
    const auto s = io::CsvTable::read((out / pipeline::files::kSummary).string());
    std::size_t total_sum = 0;
    double loss_sum = 0.0;
    for (std::size_t r = 0; r < s.rows(); ++r) {
      ++summaries;
      const auto total = static_cast<std::size_t>(s.number(r, "total"));
      std::size_t parts = 0;
      for (const char* c : {"flooded", "clearance", "in_extent_no_lfe", "outside_extent"}) {
        parts += static_cast<std::size_t>(s.number(r, c));
      }
      if (parts != total) o.fail(fmt::format("{}: categories sum to {} of {}", s.at(r, "aoi_id"), parts, total));
      if (s.at(r, "aoi_id") == risk::kRegional) {
        if (total != total_sum) o.fail("regional parcel total differs from AOI sum");
        if (std::abs(s.number(r, "total_loss_usd") - loss_sum) > 1e-6 * std::max(1.0, loss_sum)) {
          o.fail("regional loss differs from AOI sum");
        }
      } else {
        total_sum += total;
        loss_sum += s.number(r, "total_loss_usd");
      }
    }
    const auto sens = io::CsvTable::read((out / pipeline::files::kSensitivity).string());
    for (std::size_t r = 0; r < sens.rows(); ++r) {
      if (sens.number(r, "combined_loss_usd") < sens.number(r, "extracted_only_loss_usd")) {
        o.fail(sens.at(r, "aoi_id") + ": combined loss below extracted-only");
      }
    }
  }
  o.note(fmt::format("{} summary rows across {} runs: partition, additivity and sensitivity order hold", summaries,
                     outputs.size()));
  return o;
}

Outcome parser_robustness() {
  Outcome o;
  Pcg32 rng(99, 10);
  for (int t = 0; t < 100; ++t) {
    raster::RasterGrid g;
    g.nrows = 1 + static_cast<int>(rng.bounded(30));
    g.ncols = 1 + static_cast<int>(rng.bounded(30));
    g.xll = rng.uniform(-180, 180);
    g.yll = rng.uniform(-90, 90);
    g.cellsize = rng.uniform(1e-5, 10);
    g.nodata = t % 3 == 0 ? -9999.0 : -rng.uniform(1, 1e6);
    const double p_nodata = rng.uniform(0, 0.6);
    for (int i = 0; i < g.nrows * g.ncols; ++i) {
      g.values.push_back(rng.uniform() < p_nodata ? g.nodata : rng.normal() * std::pow(10.0, rng.uniform(-6, 6)));
    }
    if (raster::parse_grid(raster::serialize_grid(g)) != g) o.fail(fmt::format("grid {} did not round-trip", t));
  }

  const std::string header = "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n";
  const std::vector<std::pair<std::string, std::string>> corpus = {
      {"truncated data", header + "1 2 3\n4 5\n"},
      {"truncated row", header + "1 2 3\n"},
      {"data only", "1 2 3\n4 5 6\n"},
      {"missing ncols", "nrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n4 5 6\n"},
      {"missing cellsize", "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\n1 2 3\n4 5 6\n"},
      {"non-numeric token", header + "1 2 3\n4 five 6\n"},
      {"non-numeric header", "ncols three\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n4 5 6\n"},
      {"extra values", header + "1 2 3\n4 5 6 7\n"},
      {"negative size", "ncols -3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n"},
      {"zero cellsize", "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 0\n1 2 3\n4 5 6\n"},
      {"empty", ""},
      {"binary junk", std::string("\x01\x02\xff\n", 4)},
  };
  for (const auto& [name, text] : corpus) {
    try {
      raster::parse_grid(text);
      o.fail("accepted: " + name);
    } catch (const ParseError& e) {
      if (e.line() == 0) o.fail("no line number: " + name);
    } catch (const std::exception& e) {
      o.fail(name + " raised a non-parse error: " + e.what());
    }
  }
  o.note(fmt::format("100 random grids round-trip; {} malformed grids rejected with line numbers", corpus.size()));
  return o;
}

Outcome metric_definitions(const std::vector<fs::path>& outputs) {
  Outcome o;
  // Hand arithmetic: residuals (0.5, 0, -0.5, 0.5) -> SS_res 0.75; mean 2.5 -> SS_tot 5.
  const std::vector<double> obs = {1, 2, 3, 4};
  const std::vector<double> pred = {1.5, 2, 2.5, 4.5};
  const auto m = ml::metrics(pred, obs);
  const double want_rmse = 0.4330127018922193;
  if (std::abs(m.rmse - want_rmse) > 1e-15) o.fail(fmt::format("rmse {:.17g}", m.rmse));
  if (!m.r2 || std::abs(*m.r2 - 0.85) > 1e-15) o.fail("r2 differs from 0.85");
  if (!m.rmse_pct || std::abs(*m.rmse_pct - 17.320508075688771) > 1e-12) o.fail("rmse_pct differs");
  const std::vector<std::optional<double>> folds = {0.8, 0.6, std::nullopt, 0.7};
  const auto cv = ml::mean_fold_r2(folds);
  if (!cv || std::abs(*cv - 0.7) > 1e-15) o.fail("r2_cv differs from 0.7");
  const double gap = m.r2.value_or(NAN) - cv.value_or(NAN);
  if (std::abs(gap - 0.15) > 1e-15) o.fail("gap differs from 0.15");

  std::size_t rows = 0;
  for (const auto& out : outputs) {
    const auto t = io::CsvTable::read((out / pipeline::files::kTable5).string());
    for (std::size_t r = 0; r < t.rows(); ++r) {
      ++rows;
      const auto r2 = t.optional_number(r, "r2");
      const auto r2cv = t.optional_number(r, "r2_cv");
      const auto g = t.optional_number(r, "gap");
      if (r2 && r2cv) {
        if (!g || *g != *r2 - *r2cv) o.fail(t.at(r, "aoi_id") + ": gap is not r2 - r2_cv");
      } else if (g) {
        o.fail(t.at(r, "aoi_id") + ": gap without both scores");
      }
    }
  }
  if (rows == 0) o.fail("no model rows exported");
  o.note(fmt::format("4-point rmse {:.6f}, r2 0.85, r2_cv 0.7, gap 0.15; {} exported model rows satisfy gap identity",
                     m.rmse, rows));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    fmt::print(stderr, "usage: floodline_acceptance <scratch-dir> [criterion ...]\n");
    return 2;
  }
  g_scratch = fs::absolute(argv[1]);
  fs::create_directories(g_scratch);
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::stoi(argv[i]));
  auto selected = [&](int id) { return only.empty() || only.count(id); };

  fs::path determinism_out;
  std::vector<fs::path> run_outputs;
  const std::vector<std::pair<int, std::string>> names = {
      {1, "DDF exactness"},        {2, "DDF floor and cap"},      {3, "geometry oracle"},
      {4, "synthetic recovery"},   {5, "imputation recovery"},    {6, "gating"},
      {7, "ensemble properties"},  {8, "determinism"},            {9, "bookkeeping identities"},
      {10, "parser robustness"},   {11, "metric definitions"},
  };
  const std::map<int, std::function<Outcome()>> checks = {
      {1, ddf_exactness},
      {2, ddf_floor_cap},
      {3, geometry_oracle},
      {4,
       [&] {
         auto o = synthetic_recovery();
         run_outputs.push_back(g_scratch / "recovery" / "out");
         return o;
       }},
      {5, imputation_recovery},
      {6,
       [&] {
         auto o = gating();
         run_outputs.push_back(g_scratch / "gating" / "out");
         return o;
       }},
      {7, ensemble_properties},
      {8,
       [&] {
         auto o = determinism(determinism_out);
         if (!determinism_out.empty()) run_outputs.push_back(determinism_out);
         return o;
       }},
      {9, [&] { return bookkeeping(run_outputs); }},
      {10, parser_robustness},
      {11, [&] { return metric_definitions(run_outputs); }},
  };

  int failures = 0;
  for (const auto& [id, name] : names) {
    if (!selected(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = checks.at(id)();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    failures += !o.pass;
    fmt::print("{} [{:>2}] {}: {} ({:.1f} s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail, seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
