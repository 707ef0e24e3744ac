#include <doctest.h>

#include <cmath>
#include <map>

#include "floodline/errors.hpp"
#include "floodline/io.hpp"
#include "floodline/pipeline.hpp"
#include "floodline/synth.hpp"
#include "scratch.hpp"

using namespace floodline;
namespace fs = std::filesystem;

namespace {

const std::string kBinary = FLOODLINE_BINARY;

int cli(const std::string& args) { return scratch::run_quiet(kBinary + " " + args); }

// One imaged AOI (60% coverage, 70% door visibility) and one without imagery.
fs::path make_fixture(const std::string& tag) {
  const auto dir = scratch::temp_dir(tag);
  synth::Params p;
  p.output_dir = dir.string();
  p.seed = 17;
  p.n_iter = 1;
  p.k_folds = 3;
  synth::AoiParams a;
  a.id = "MIX";
  a.n_parcels = 120;
  a.workflow = ml::WorkflowMode::batch_standard;
  a.coverage = 0.6;
  a.door_visibility = 0.7;
  synth::AoiParams b = a;
  b.id = "DARK";
  b.n_parcels = 40;
  b.coverage = 0.0;
  b.center_lat = 29.9;
  p.aois = {a, b};
  synth::cmd_synth(p);
  return dir;
}

std::map<std::string, std::size_t> index_by(const io::CsvTable& t, const std::string& col) {
  std::map<std::string, std::size_t> out;
  for (std::size_t r = 0; r < t.rows(); ++r) out[t.at(r, col)] = r;
  return out;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("end to end run on a mixed fixture") {
    const auto dir = make_fixture("pipe");
    const std::string cfg = "--config " + (dir / "config.json").string();
    for (const char* stage : {"extract", "impute", "assess", "report"}) REQUIRE(cli(std::string(stage) + " " + cfg) == 0);
    const auto out = dir / "out";

    const auto truth = io::CsvTable::read((dir / "MIX" / "truth.csv").string());
    const auto est = io::CsvTable::read((out / "MIX" / pipeline::files::kEstimates).string());
    const auto row = index_by(est, "parcel_id");
    REQUIRE(est.rows() == truth.rows());
    std::size_t accepted = 0;
    for (std::size_t r = 0; r < truth.rows(); ++r) {
      const auto e = row.at(truth.at(r, "parcel_id"));
      CHECK(est.at(e, "has_imagery") == truth.at(r, "has_imagery"));
      CHECK(est.at(e, "door_visible") == truth.at(r, "door_visible"));
      if (est.at(e, "screen_status") == "accepted") {
        ++accepted;
        CHECK(std::abs(est.number(e, "hdsl_m") - truth.number(r, "hdsl_m")) < 1e-6);
      }
    }
    CHECK(accepted > 0);

    const auto cov = io::CsvTable::read((out / "MIX" / pipeline::files::kCoverage).string());
    CHECK(cov.number(0, "with_door") <= cov.number(0, "with_imagery"));
    CHECK(cov.number(0, "with_imagery") <= cov.number(0, "total"));
    const auto dark = io::CsvTable::read((out / "DARK" / pipeline::files::kCoverage).string());
    CHECK(dark.number(0, "with_imagery") == 0);

    const auto merged = io::CsvTable::read((out / "MIX" / pipeline::files::kMerged).string());
    for (std::size_t r = 0; r < merged.rows(); ++r) {
      const auto e = row.at(merged.at(r, "parcel_id"));
      if (est.at(e, "screen_status") == "accepted") {
        CHECK(merged.at(r, "hdsl_source") == "extracted");
        CHECK(merged.at(r, "hdsl_m") == est.at(e, "hdsl_m"));
      } else {
        CHECK(merged.at(r, "hdsl_source") != "extracted");
      }
    }

    const auto dark_merged = io::CsvTable::read((out / "DARK" / pipeline::files::kMerged).string());
    for (std::size_t r = 0; r < dark_merged.rows(); ++r) CHECK(dark_merged.at(r, "hdsl_source") == "missing");

    for (const char* f : {pipeline::files::kSummary, pipeline::files::kSensitivity, pipeline::files::kTable3,
                          pipeline::files::kTable5, pipeline::files::kTable6, pipeline::files::kReport,
                          pipeline::files::kManifest}) {
      CHECK(fs::exists(out / f));
    }
    fs::remove_all(dir);
  }

  TEST_CASE("exit codes") {
    const auto dir = make_fixture("exit");
    const std::string cfg = "--config " + (dir / "config.json").string();
    CHECK(cli("") == 1);
    CHECK(cli("extract") == 1);
    CHECK(cli("bogus " + cfg) == 1);
    CHECK(cli("extract --config " + (dir / "nope.json").string()) == 1);
    CHECK(cli("extract " + cfg + " --aoi NOPE") == 1);
    CHECK(cli("extract " + cfg + " --seed notanumber") == 1);

    scratch::write_text(dir / "broken.json", "{\"aois\": [");
    CHECK(cli("extract --config " + (dir / "broken.json").string()) == 1);

    // Stage order: impute needs extract output.
    CHECK(cli("impute " + cfg) == 2);
    CHECK(cli("extract " + cfg + " --aoi MIX") == 0);
    CHECK(cli("impute " + cfg + " --aoi MIX") == 0);
    CHECK(cli("impute " + cfg) == 2);

    // A manifest without the DEM layer fails the stage, not the input parse.
    auto manifest = nlohmann::json::parse(io::read_file((dir / "DARK" / "rasters" / "manifest.json").string()));
    manifest["layers"].erase("dem");
    scratch::write_text(dir / "DARK" / "rasters" / "manifest.json", manifest.dump());
    CHECK(cli("extract " + cfg + " --aoi DARK") == 2);

    // Malformed parcels are an input error.
    scratch::write_text(dir / "MIX" / "parcels.csv", "parcel_id,aoi_id,lat,lon,street_name,assessed_value_usd\nX,MIX,abc,1,s,1\n");
    CHECK(cli("extract " + cfg + " --aoi MIX") == 1);
    fs::remove_all(dir);
  }

  TEST_CASE("config validation") {
    const auto base = nlohmann::json::parse(R"({"rng_seed": 1, "aois": [
        {"id": "A", "rasters": "a/m.json", "parcels": "a/p.csv", "panoramas": "a/x.jsonl"}]})");
    const auto ok = pipeline::parse_config(base, "/tmp");
    CHECK(ok.gate_threshold == 0.15);
    CHECK(ok.tie_window == 0.01);
    CHECK(ok.n_iter == 30);
    CHECK(ok.k_folds == 5);
    CHECK(ok.resolve("a/p.csv") == "/tmp/a/p.csv");

    auto no_seed = base;
    no_seed.erase("rng_seed");
    CHECK_THROWS_AS(pipeline::parse_config(no_seed, "/tmp"), InputError);

    auto dup = base;
    dup["aois"].push_back(base["aois"][0]);
    CHECK_THROWS_AS(pipeline::parse_config(dup, "/tmp"), InputError);

    auto regional = base;
    regional["aois"][0]["id"] = "REGIONAL";
    CHECK_THROWS_AS(pipeline::parse_config(regional, "/tmp"), InputError);

    auto folds = base;
    folds["k_folds"] = 1;
    CHECK_THROWS_AS(pipeline::parse_config(folds, "/tmp"), InputError);

    auto threads = base;
    threads["threads"] = 4;
    threads["output_dir"] = "elsewhere";
    CHECK(pipeline::parse_config(threads, "/tmp").hash() == ok.hash());
    auto seed = base;
    seed["rng_seed"] = 2;
    CHECK(pipeline::parse_config(seed, "/tmp").hash() != ok.hash());

    auto cfg = ok;
    CHECK_THROWS_AS(pipeline::select_aois(cfg, {"B"}), InputError);
    pipeline::select_aois(cfg, {"A"});
    CHECK(cfg.is_selected("A"));
  }

  TEST_CASE("parcel reader") {
    const auto dir = scratch::temp_dir("parcels");
    scratch::write_text(dir / "p.csv",
                        "parcel_id,aoi_id,lat,lon,street_name,assessed_value_usd\nA1,A,29.7,-95.4,Oak St,1000\n"
                        "A2,A,29.71,-95.41,,2000\n");
    const auto ps = pipeline::read_parcels((dir / "p.csv").string(), "A");
    REQUIRE(ps.size() == 2);
    CHECK(ps[1].street_name.empty());
    CHECK(ps[1].assessed_value_usd == 2000);
    CHECK_THROWS_AS(pipeline::read_parcels((dir / "p.csv").string(), "B"), InputError);

    scratch::write_text(dir / "d.csv",
                        "parcel_id,lat,lon,street_name,assessed_value_usd\nA1,29.7,-95.4,Oak,1\nA1,29.7,-95.4,Oak,1\n");
    try {
      pipeline::read_parcels((dir / "d.csv").string(), "A");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
    scratch::write_text(dir / "n.csv", "parcel_id,lat,lon,street_name,assessed_value_usd\nA1,29.7,-95.4,Oak,-5\n");
    CHECK_THROWS_AS(pipeline::read_parcels((dir / "n.csv").string(), "A"), InputError);
    fs::remove_all(dir);
  }
}
