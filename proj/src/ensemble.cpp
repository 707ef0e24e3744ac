#include "floodline/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "floodline/errors.hpp"

namespace floodline::ml {

std::string_view to_string(Algo a) { return a == Algo::random_forest ? "random_forest" : "gradient_boost"; }

Algo parse_algo(std::string_view s) {
  if (s == "random_forest" || s == "rf") return Algo::random_forest;
  if (s == "gradient_boost" || s == "gb") return Algo::gradient_boost;
  throw InputError("unknown algorithm '" + std::string(s) + "'");
}

TreeParams Hyperparams::tree_params() const {
  TreeParams p;
  p.max_depth = max_depth;
  p.min_samples_leaf = min_samples_leaf;
  p.feature_subset = algo == Algo::random_forest ? feature_subset : 0;
  return p;
}

std::string Hyperparams::describe() const {
  const std::string depth = max_depth ? std::to_string(*max_depth) : "none";
  if (algo == Algo::random_forest) {
    return fmt::format("rf trees={} depth={} leaf={} subset={}", n_trees, depth, min_samples_leaf,
                       feature_subset > 0 ? std::to_string(feature_subset) : "all");
  }
  return fmt::format("gb trees={} eta={} depth={} leaf={}", n_trees, learning_rate, depth, min_samples_leaf);
}

std::vector<RegressionTree> fit_forest(const Matrix& x, const ColumnOrder& order, std::span<const double> y,
                                       int n_trees, const TreeParams& params, const RngStream& stream,
                                       Execution exec) {
  if (n_trees < 1) throw std::invalid_argument("forest needs at least one tree");
  if (x.rows == 0) throw std::invalid_argument("forest needs at least one row");
  std::vector<RegressionTree> trees(static_cast<std::size_t>(n_trees));
  const auto n = static_cast<std::uint32_t>(x.rows);

  auto grow = [&](int t) {
    Pcg32 rng = stream.child(static_cast<std::uint64_t>(t)).engine();
    std::vector<std::uint32_t> counts(n, 0);
    for (std::uint32_t i = 0; i < n; ++i) ++counts[rng.bounded(n)];
    trees[static_cast<std::size_t>(t)] = fit_tree(x, order, y, counts, params, rng);
  };

  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < n_trees; ++t) grow(t);
  } else {
    for (int t = 0; t < n_trees; ++t) grow(t);
  }
  return trees;
}

namespace {

double rmse_of(std::span<const double> residual) {
  double ss = 0.0;
  for (double r : residual) ss += r * r;
  return std::sqrt(ss / static_cast<double>(residual.size()));
}

}  // namespace

BoostedTrees fit_boosting(const Matrix& x, const ColumnOrder& order, std::span<const double> y, int n_trees,
                          double learning_rate, const TreeParams& params, const RngStream& stream) {
  if (n_trees < 1) throw std::invalid_argument("boosting needs at least one tree");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (x.rows == 0) throw std::invalid_argument("boosting needs at least one row");

  BoostedTrees out;
  double sum = 0.0;
  for (double v : y) sum += v;
  out.base_prediction = sum / static_cast<double>(y.size());

  std::vector<double> fitted(y.size(), out.base_prediction);
  std::vector<double> residual(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) residual[i] = y[i] - fitted[i];
  out.train_rmse.push_back(rmse_of(residual));
  out.trees.reserve(static_cast<std::size_t>(n_trees));

  for (int m = 0; m < n_trees; ++m) {
    Pcg32 rng = stream.child(static_cast<std::uint64_t>(m)).engine();
    RegressionTree tree = fit_tree(x, order, residual, {}, params, rng);
    for (std::size_t i = 0; i < y.size(); ++i) {
      fitted[i] += learning_rate * tree.predict(x.row(i));
      residual[i] = y[i] - fitted[i];
    }
    out.train_rmse.push_back(rmse_of(residual));
    out.trees.push_back(std::move(tree));
  }
  return out;
}

double EnsembleModel::predict_scaled(std::span<const double> scaled) const {
  if (trees.empty()) throw std::logic_error("model has no trees");
  if (hyper.algo == Algo::random_forest) {
    double sum = 0.0;
    double lo = trees.front().predict(scaled);
    double hi = lo;
    for (const auto& t : trees) {
      const double v = t.predict(scaled);
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    // The rounded average of equal terms can land one ulp outside their range.
    return std::clamp(sum / static_cast<double>(trees.size()), lo, hi);
  }
  double f = base_prediction;
  for (const auto& t : trees) f += hyper.learning_rate * t.predict(scaled);
  return f;
}

double EnsembleModel::predict(std::span<const double> raw) const {
  if (scaler.empty()) return predict_scaled(raw);
  return predict_scaled(scaler.transform(raw));
}

std::vector<double> EnsembleModel::predict(const Matrix& raw, Execution exec) const {
  std::vector<double> out(raw.rows);
  const auto n = static_cast<long long>(raw.rows);
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = predict(raw.row(static_cast<std::size_t>(i)));
  } else {
    for (long long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = predict(raw.row(static_cast<std::size_t>(i)));
  }
  return out;
}

std::vector<double> EnsembleModel::tree_predictions(std::span<const double> raw) const {
  const auto scaled = scaler.empty() ? std::vector<double>(raw.begin(), raw.end()) : scaler.transform(raw);
  std::vector<double> out;
  out.reserve(trees.size());
  for (const auto& t : trees) out.push_back(t.predict(scaled));
  return out;
}

FeatureImportance EnsembleModel::importance() const {
  FeatureImportance out;
  const std::size_t cols = scaler.empty() ? 0 : scaler.median().size();
  out.weights.assign(cols, 0.0);
  for (const auto& t : trees) t.accumulate_gain(out.weights);
  double total = 0.0;
  for (double w : out.weights) total += w;
  if (!(total > 0.0)) {
    std::fill(out.weights.begin(), out.weights.end(), 0.0);
    out.degenerate = true;
    return out;
  }
  for (double& w : out.weights) w /= total;
  return out;
}

EnsembleModel fit_model(const Matrix& x, std::span<const double> y, const Hyperparams& hyper,
                        const RngStream& stream, Execution exec) {
  EnsembleModel model;
  model.hyper = hyper;
  model.stream_key = stream.key();
  model.scaler = RobustScaler::fit(x);
  const Matrix scaled = model.scaler.transform(x);
  const ColumnOrder order(scaled);
  if (hyper.algo == Algo::random_forest) {
    model.trees = fit_forest(scaled, order, y, hyper.n_trees, hyper.tree_params(), stream, exec);
  } else {
    auto boosted = fit_boosting(scaled, order, y, hyper.n_trees, hyper.learning_rate, hyper.tree_params(), stream);
    model.base_prediction = boosted.base_prediction;
    model.trees = std::move(boosted.trees);
  }
  return model;
}

}  // namespace floodline::ml
