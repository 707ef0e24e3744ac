#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "floodline/features.hpp"
#include "floodline/workflow.hpp"

namespace floodline::pipeline {

struct AoiConfig {
  std::string id;
  ml::WorkflowMode workflow = ml::WorkflowMode::tuning_extended;
  std::string rasters;     ///< raster manifest
  std::string parcels;     ///< parcels CSV
  std::string panoramas;   ///< panorama metadata (JSON Lines); empty = no imagery
};

/// One run of the pipeline. Relative paths resolve against the config file's
/// directory; `output_dir` likewise.
struct RunConfig {
  std::vector<AoiConfig> aois;
  std::uint64_t rng_seed = 0;
  double gate_threshold = 0.15;
  double tie_window = 0.01;
  int n_iter = 30;
  std::size_t k_folds = 5;
  std::string output_dir = "out";
  int threads = 1;  ///< > 1 enables the OpenMP kernels

  /// AOIs chosen with --aoi; empty means all. Summary files always cover
  /// every configured AOI whose outputs exist.
  std::vector<std::string> selected;

  std::string base_dir;  ///< directory of the config file
  bool is_selected(const std::string& aoi_id) const;
  /// SHA-256 over the canonical JSON of every field that affects results.
  /// output_dir and threads are left out: neither changes any output byte.
  std::string hash() const;
  std::string resolve(const std::string& path) const;
  std::string aoi_dir(const std::string& aoi_id) const;
  std::string out_path(const std::string& relative) const;
  nlohmann::json to_json() const;
};

/// Throws InputError on a malformed or inconsistent document.
RunConfig parse_config(const nlohmann::json& doc, const std::string& base_dir);
RunConfig load_config(const std::string& path);

/// Restricts the per-AOI stage work to `ids`. Unknown ids are an InputError.
void select_aois(RunConfig& config, const std::vector<std::string>& ids);

/// Parcels CSV: parcel_id, lat, lon, street_name, assessed_value_usd and an
/// optional aoi_id column that must match `aoi_id` when present.
std::vector<features::ParcelRecord> read_parcels(const std::string& path, const std::string& aoi_id);

/// Stage entry points. Input errors propagate as InputError; per-AOI stage
/// failures are recorded in the run manifest and rethrown as one StageError
/// once every selected AOI has been attempted.
void cmd_extract(const RunConfig& config);
void cmd_impute(const RunConfig& config);
void cmd_assess(const RunConfig& config);
void cmd_report(const RunConfig& config);

/// File names inside `<output_dir>/<aoi>/` and `<output_dir>/`.
namespace files {
inline constexpr const char* kEstimates = "estimates.csv";
inline constexpr const char* kCoverage = "coverage.csv";
inline constexpr const char* kFeatures = "features.csv";
inline constexpr const char* kModel = "model.json";
inline constexpr const char* kModelReport = "model_report.csv";
inline constexpr const char* kSearchLog = "search_log.csv";
inline constexpr const char* kMerged = "merged_hdsl.csv";
inline constexpr const char* kImputeDrops = "impute_drops.csv";
inline constexpr const char* kAssessment = "assessment.csv";
inline constexpr const char* kGeoJson = "assessment.geojson";
inline constexpr const char* kValueDrops = "value_filter_drops.csv";
inline constexpr const char* kSummary = "summary.csv";
inline constexpr const char* kSensitivity = "sensitivity.csv";
inline constexpr const char* kTable3 = "table3_coverage.csv";
inline constexpr const char* kTable5 = "table5_models.csv";
inline constexpr const char* kTable6 = "table6_risk.csv";
inline constexpr const char* kReport = "report.txt";
inline constexpr const char* kManifest = "run_manifest.json";
}  // namespace files

}  // namespace floodline::pipeline
