#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "floodline/ensemble.hpp"
#include "floodline/metrics.hpp"
#include "floodline/preprocess.hpp"

namespace floodline::ml {

enum class WorkflowMode { batch_standard, tuning_extended };

std::string_view to_string(WorkflowMode m);
WorkflowMode parse_workflow_mode(std::string_view s);

/// Every configuration of the randomized-search grid for `algo`, in a fixed order.
std::vector<Hyperparams> search_space(Algo algo);

/// Fixed configuration of the batch workflow.
Hyperparams batch_hyperparams(Algo algo);

/// One evaluated configuration: hold-out metrics on a 20% split plus K-fold CV.
struct Candidate {
  Hyperparams hyper;
  OutlierConfig outlier;
  std::size_t n_train = 0;  ///< rows after outlier handling
  Metrics holdout;
  std::optional<double> r2_cv;
  std::optional<double> gap;  ///< holdout R^2 - r2_cv, when both exist
};

Candidate evaluate_candidate(const Dataset& rows, const Hyperparams& hyper, const OutlierConfig& outlier,
                             std::size_t k_folds, const RngStream& stream, Execution exec = Execution::serial);

/// Highest r2_cv wins; among candidates within `tie_window` of it the smallest
/// |gap| wins (missing gap ranks last), then the earliest. nullopt when no
/// candidate has an r2_cv.
std::optional<std::size_t> select_best(const std::vector<Candidate>& candidates, double tie_window);

struct SearchCell {
  OutlierConfig outlier;
  Algo algo = Algo::random_forest;
  bool applicable = true;
  std::string skipped_reason;
  std::vector<Candidate> evaluated;
  std::optional<std::size_t> best;
};

struct SearchOptions {
  int n_iter = 30;
  std::size_t k_folds = 5;
  double tie_window = 0.01;
  Execution exec = Execution::serial;
};

/// For every outlier configuration and each algorithm, samples n_iter distinct
/// configurations from the grid, scores each, and records the cell winner.
/// Cells are ordered (outlier config, algo) with RF before GB.
std::vector<SearchCell> randomized_search(const Dataset& cleaned, std::span<const Algo> algos,
                                          const SearchOptions& options, const RngStream& stream);

struct GateDecision {
  std::optional<std::size_t> selected;
  std::optional<double> best_r2_cv;
  bool gate_passed = false;
};

/// select_best over `candidates`; the gate passes when the best r2_cv reaches `threshold`.
GateDecision select_and_gate(const std::vector<Candidate>& candidates, double threshold, double tie_window);

struct ModelReport {
  std::string aoi_id;
  WorkflowMode workflow = WorkflowMode::batch_standard;
  std::optional<Candidate> chosen;
  std::size_t n_train = 0;
  double rmse_m = 0.0;
  std::optional<double> rmse_pct;
  std::optional<double> r2;
  std::optional<double> r2_cv;
  std::optional<double> gap;
  bool selected = false;
  bool gate_passed = false;
  std::size_t n_predicted = 0;
  std::size_t n_clamped = 0;
  std::string note;
};

struct Prediction {
  std::string parcel_id;
  double hdsl_m = 0.0;
  bool clamped = false;
};

struct WorkflowOptions {
  WorkflowMode mode = WorkflowMode::tuning_extended;
  int n_iter = 30;
  std::size_t k_folds = 5;
  double gate_threshold = 0.15;
  double tie_window = 0.01;
  Execution exec = Execution::serial;
};

struct WorkflowResult {
  std::optional<EnsembleModel> model;
  ModelReport report;
  std::vector<SearchCell> cells;  ///< tuning workflow only
  std::vector<Candidate> batch_candidates;  ///< batch workflow only: RF then GB
  std::vector<Prediction> predictions;
  std::vector<std::string> cleaned_out;  ///< training ids dropped by target cleaning
};

/// Cleans targets, trains per `options.mode`, gates, and when the gate passes
/// predicts every prediction row, clamping to [0, P99.5 of training HDSL].
WorkflowResult run_workflow(const std::string& aoi_id, const Dataset& training, const Dataset& prediction_rows,
                            const WorkflowOptions& options, const RngStream& stream);

}  // namespace floodline::ml
