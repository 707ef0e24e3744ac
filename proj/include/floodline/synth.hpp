#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "floodline/workflow.hpp"

namespace floodline::synth {

/// How the generated HDSL depends on the terrain.
enum class HdslModel {
  linear,  ///< intercept + elevation_coef * elevation + hand_coef * HAND + sigma * N(0, 1)
  noise,   ///< uniform on [noise_lo, noise_hi], independent of every feature
};

struct AoiParams {
  std::string id = "SYN";
  std::size_t n_parcels = 200;
  ml::WorkflowMode workflow = ml::WorkflowMode::tuning_extended;
  HdslModel model = HdslModel::linear;
  double intercept = 0.2;
  double elevation_coef = 0.1;
  double hand_coef = 0.05;
  double sigma = 0.0;
  double noise_lo = 0.2;
  double noise_hi = 1.5;
  double coverage = 1.0;          ///< share of parcels with a panorama
  double door_visibility = 1.0;   ///< share of imaged parcels whose door is segmented
  double flood_offset_m = 0.0;    ///< added to the flood surface everywhere
  double center_lat = 29.70;
  double center_lon = -95.40;
};

struct Params {
  std::string output_dir = "fixture";
  std::uint64_t seed = 1;
  int n_iter = 30;
  std::size_t k_folds = 5;
  int threads = 1;
  std::vector<AoiParams> aois;
};

/// Accepts either {"aois": [...], ...} or a single AOI's fields at top level.
/// Relative output_dir resolves against `base_dir`.
Params parse_params(const nlohmann::json& doc, const std::string& base_dir);
Params load_params(const std::string& path);

/// Writes `<output_dir>/config.json` plus, per AOI, parcels.csv,
/// panoramas.jsonl, depth and mask files, rasters with their manifest, and
/// truth.csv (generated HDSL and the drawn imagery/door flags).
void cmd_synth(const Params& params);

/// Camera height above the roadside point used for every panorama.
inline constexpr double kCameraHeightM = 2.5;

}  // namespace floodline::synth
