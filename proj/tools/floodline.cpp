// floodline: per-parcel flood loss pipeline.
//
//   floodline extract|impute|assess|report|synth --config <path> [--seed N] [--aoi ID ...]
//
// Exit codes: 0 success, 1 input error, 2 stage failure.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "floodline/errors.hpp"
#include "floodline/pipeline.hpp"
#include "floodline/synth.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kStageFailure = 2;

int run(const std::string& command, const std::string& config_path, std::optional<std::uint64_t> seed,
        const std::vector<std::string>& aois) {
  using namespace floodline;
  const auto start = std::chrono::steady_clock::now();
  if (command == "synth") {
    auto params = synth::load_params(config_path);
    if (seed) params.seed = *seed;
    synth::cmd_synth(params);
  } else {
    auto config = pipeline::load_config(config_path);
    if (seed) config.rng_seed = *seed;
    pipeline::select_aois(config, aois);
    omp_set_num_threads(config.threads);
    if (command == "extract") {
      pipeline::cmd_extract(config);
    } else if (command == "impute") {
      pipeline::cmd_impute(config);
    } else if (command == "assess") {
      pipeline::cmd_assess(config);
    } else {
      pipeline::cmd_report(config);
    }
  }
  // Timings go to stderr only so the output directory stays byte-identical across runs.
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  fmt::print(stderr, "floodline: {} finished in {:.2f} s\n", command, elapsed.count());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Street-view lowest-floor extraction, imputation and flood loss assessment"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> aois;
  std::string chosen;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"extract", "Estimate lowest-floor elevation and HDSL from panoramas"},
      {"impute", "Train the HDSL model per AOI and fill parcels without an extracted value"},
      {"assess", "Compute flood depth, damage and loss per parcel with AOI and regional summaries"},
      {"report", "Render coverage, model and risk tables"},
      {"synth", "Generate a synthetic AOI fixture (--config names the generator parameters)"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("--seed", seed, "Override the configured RNG seed");
    if (name != "synth") sub->add_option("--aoi", aois, "Restrict the stage to these AOI ids");
    sub->callback([&chosen, n = name] { chosen = n; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    return run(chosen, config_path, seed, aois);
  } catch (const floodline::InputError& e) {
    fmt::print(stderr, "floodline: input error: {}\n", e.what());
    return kInputError;
  } catch (const floodline::StageError& e) {
    fmt::print(stderr, "floodline: stage failure: {}\n", e.what());
    return kStageFailure;
  } catch (const std::exception& e) {
    fmt::print(stderr, "floodline: stage failure: {}\n", e.what());
    return kStageFailure;
  }
}
