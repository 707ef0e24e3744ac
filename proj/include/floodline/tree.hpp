#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "floodline/rng.hpp"

namespace floodline::ml {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }

  Matrix select_rows(std::span<const std::uint32_t> indices) const;
  void append_row(std::span<const double> values);

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Row indices sorted by each column's value, ties by row index. Computed
/// once per training matrix and shared by every tree fitted on it.
class ColumnOrder {
 public:
  ColumnOrder() = default;
  explicit ColumnOrder(const Matrix& x);

  std::span<const std::uint32_t> column(std::size_t c) const { return sorted_[c]; }
  std::size_t cols() const noexcept { return sorted_.size(); }

 private:
  std::vector<std::vector<std::uint32_t>> sorted_;
};

struct TreeParams {
  std::optional<int> max_depth;  ///< nullopt grows until leaves are pure or too small
  int min_samples_leaf = 1;
  int feature_subset = 0;  ///< features tried per split; 0 or >= cols means all
};

struct TreeNode {
  int feature = -1;  ///< -1 marks a leaf
  double threshold = 0.0;  ///< x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  ///< mean target of the training samples routed here
  double gain = 0.0;  ///< squared-error reduction of this split (sample-weighted)
  std::uint32_t samples = 0;

  bool leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// CART regression tree stored as a preorder node list (root at 0).
class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> x) const;
  /// Index of the leaf that `x` is routed to.
  int leaf_index(std::span<const double> x) const;

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  int depth() const;
  std::size_t leaf_count() const;
  /// Adds each split's gain to `out[feature]`.
  void accumulate_gain(std::span<double> out) const;

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

 private:
  std::vector<TreeNode> nodes_;
};

/// Greedy variance-reduction CART on presorted columns.
///
/// `counts[r]` is the multiplicity of row r in the sample (bootstrap draws);
/// empty means every row once. Candidate thresholds are midpoints between
/// consecutive distinct values. Features are drawn per node from `rng` when
/// `feature_subset` is smaller than the column count; the first best split
/// in ascending feature order wins ties. Nodes are built depth-first, left
/// subtree before right.
RegressionTree fit_tree(const Matrix& x, const ColumnOrder& order, std::span<const double> y,
                        std::span<const std::uint32_t> counts, const TreeParams& params, Pcg32& rng);

/// Convenience overload that presorts `x` itself and uses every row once.
RegressionTree fit_tree(const Matrix& x, std::span<const double> y, const TreeParams& params, Pcg32& rng);

/// Features considered at a node: all columns in order, or a sorted random subset.
std::vector<std::uint32_t> draw_feature_subset(std::size_t cols, int subset, Pcg32& rng);

}  // namespace floodline::ml
