#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "floodline/preprocess.hpp"
#include "floodline/rng.hpp"
#include "floodline/tree.hpp"

namespace floodline::ml {

/// Kernel dispatch. Both paths consume identical RNG streams and reduce in
/// identical order, so results are bit-identical.
enum class Execution { serial, parallel };

enum class Algo { random_forest, gradient_boost };

std::string_view to_string(Algo a);
Algo parse_algo(std::string_view s);

struct Hyperparams {
  Algo algo = Algo::random_forest;
  int n_trees = 100;
  std::optional<int> max_depth;
  int min_samples_leaf = 1;
  int feature_subset = 0;  ///< RF only; 0 = all features
  double learning_rate = 0.1;  ///< GB only

  TreeParams tree_params() const;
  /// Compact human-readable form, e.g. "rf trees=300 depth=none leaf=1 subset=5".
  std::string describe() const;

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

/// T bootstrap trees (size-n draws with replacement); tree t uses stream.child(t).
std::vector<RegressionTree> fit_forest(const Matrix& x, const ColumnOrder& order, std::span<const double> y,
                                       int n_trees, const TreeParams& params, const RngStream& stream,
                                       Execution exec);

struct BoostedTrees {
  double base_prediction = 0.0;  ///< training-target mean
  std::vector<RegressionTree> trees;
  /// Training RMSE after 0, 1, ..., M trees.
  std::vector<double> train_rmse;
};

/// F_0 = mean(y); each tree is fit to y - F_{m-1}(x) and added with weight eta.
BoostedTrees fit_boosting(const Matrix& x, const ColumnOrder& order, std::span<const double> y, int n_trees,
                          double learning_rate, const TreeParams& params, const RngStream& stream);

struct FeatureImportance {
  std::vector<double> weights;  ///< normalized to sum 1, or all zero when degenerate
  bool degenerate = false;  ///< no split anywhere in the ensemble
};

/// Trained ensemble with its feature scaler. Inputs to predict() are raw features.
class EnsembleModel {
 public:
  Hyperparams hyper;
  RobustScaler scaler;
  OutlierConfig outlier;
  std::vector<RegressionTree> trees;
  double base_prediction = 0.0;  ///< GB only
  std::uint64_t stream_key = 0;

  double predict(std::span<const double> raw) const;
  std::vector<double> predict(const Matrix& raw, Execution exec = Execution::serial) const;
  /// Per-tree outputs on scaled input (RF: h_t(x); GB: unweighted h_m(x)).
  std::vector<double> tree_predictions(std::span<const double> raw) const;

  FeatureImportance importance() const;

 private:
  double predict_scaled(std::span<const double> scaled) const;
};

/// Fits the scaler on `x`, then the ensemble on the scaled features.
EnsembleModel fit_model(const Matrix& x, std::span<const double> y, const Hyperparams& hyper,
                        const RngStream& stream, Execution exec = Execution::serial);

}  // namespace floodline::ml
