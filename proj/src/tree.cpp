#include "floodline/tree.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace floodline::ml {

Matrix Matrix::select_rows(std::span<const std::uint32_t> indices) const {
  Matrix out(indices.size(), cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void Matrix::append_row(std::span<const double> values) {
  if (rows == 0 && cols == 0) cols = values.size();
  if (values.size() != cols) throw std::invalid_argument("row width mismatch");
  data.insert(data.end(), values.begin(), values.end());
  ++rows;
}

ColumnOrder::ColumnOrder(const Matrix& x) : sorted_(x.cols) {
  for (std::size_t c = 0; c < x.cols; ++c) {
    auto& idx = sorted_[c];
    idx.resize(x.rows);
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, c) < x(b, c); });
  }
}

double RegressionTree::predict(std::span<const double> x) const { return nodes_[leaf_index(x)].value; }

int RegressionTree::leaf_index(std::span<const double> x) const {
  int i = 0;
  while (!nodes_[i].leaf()) {
    const TreeNode& n = nodes_[i];
    i = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return i;
}

int RegressionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<int> level(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes_[i].leaf()) {
      level[nodes_[i].left] = level[i] + 1;
      level[nodes_[i].right] = level[i] + 1;
    }
  }
  return deepest;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.leaf(); }));
}

void RegressionTree::accumulate_gain(std::span<double> out) const {
  for (const auto& n : nodes_) {
    if (!n.leaf()) out[n.feature] += n.gain;
  }
}

std::vector<std::uint32_t> draw_feature_subset(std::size_t cols, int subset, Pcg32& rng) {
  if (subset <= 0 || static_cast<std::size_t>(subset) >= cols) {
    std::vector<std::uint32_t> all(cols);
    std::iota(all.begin(), all.end(), 0u);
    return all;
  }
  auto picked = rng.sample_without_replacement(static_cast<std::uint32_t>(cols), static_cast<std::uint32_t>(subset));
  std::sort(picked.begin(), picked.end());
  return picked;
}

namespace {

/// Samples are addressed by "position": one slot per (row, copy) pair, rows
/// ascending. Every column keeps its positions sorted by value; a node owns
/// the same [begin, end) range in every column, and splits stable-partition
/// each column so the invariant holds for the children.
class Builder {
 public:
  Builder(const Matrix& x, const ColumnOrder& order, std::span<const double> y, std::span<const std::uint32_t> counts,
          const TreeParams& params, Pcg32& rng)
      : params_(params), rng_(rng), cols_(x.cols) {
    if (!counts.empty() && counts.size() != x.rows) throw std::invalid_argument("counts size mismatch");
    std::vector<std::uint32_t> first(x.rows + 1, 0);
    for (std::size_t r = 0; r < x.rows; ++r) first[r + 1] = first[r] + (counts.empty() ? 1u : counts[r]);
    const std::size_t m = first.back();
    if (m == 0) throw std::invalid_argument("cannot fit a tree on zero samples");

    y_.resize(m);
    for (std::size_t r = 0; r < x.rows; ++r) {
      for (std::uint32_t p = first[r]; p < first[r + 1]; ++p) y_[p] = y[r];
    }
    // One entry array per feature plus a trailing one in position order.
    // Storage is reused across trees fitted on the same thread.
    cols_data_.resize(cols_ + 1);
    for (auto& c : cols_data_) c.resize(m);
    for (std::size_t c = 0; c < cols_; ++c) {
      std::size_t i = 0;
      for (std::uint32_t r : order.column(c)) {
        for (std::uint32_t p = first[r]; p < first[r + 1]; ++p) cols_data_[c][i++] = {x(r, c), y_[p], p};
      }
    }
    for (std::uint32_t p = 0; p < m; ++p) cols_data_[cols_][p] = {0.0, y_[p], p};
    buffer_.resize(m);
    goes_left_.resize(m);
  }

  RegressionTree run() {
    build(0, y_.size(), 0);
    return RegressionTree(std::move(nodes_));
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
    std::size_t n_left = 0;
  };

  int build(std::size_t begin, std::size_t end, int depth) {
    const std::size_t n = end - begin;
    const auto& by_pos = cols_data_[cols_];
    double sum = 0.0;
    double lo = by_pos[begin].y;
    double hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      const double v = by_pos[i].y;
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double mean = sum / static_cast<double>(n);

    const int idx = static_cast<int>(nodes_.size());
    TreeNode node;
    node.value = mean;
    node.samples = static_cast<std::uint32_t>(n);
    nodes_.push_back(node);

    const auto leaf = static_cast<std::size_t>(std::max(1, params_.min_samples_leaf));
    if ((params_.max_depth && depth >= *params_.max_depth) || n < 2 || n < 2 * leaf || lo == hi) return idx;

    const Split split = best_split(begin, end, mean, leaf);
    if (split.feature < 0) return idx;

    // Children that cannot split only need their samples in position order.
    auto terminal = [&](std::size_t size) {
      return size < 2 || size < 2 * leaf || (params_.max_depth && depth + 1 >= *params_.max_depth);
    };
    partition(begin, end, split, terminal(split.n_left) && terminal(n - split.n_left));
    nodes_[idx].feature = split.feature;
    nodes_[idx].threshold = split.threshold;
    nodes_[idx].gain = split.gain;
    const int left = build(begin, begin + split.n_left, depth + 1);
    const int right = build(begin + split.n_left, end, depth + 1);
    nodes_[idx].left = left;
    nodes_[idx].right = right;
    return idx;
  }

  Split best_split(std::size_t begin, std::size_t end, double mean, std::size_t leaf) {
    const std::size_t n = end - begin;
    const auto& by_pos = cols_data_[cols_];
    double total = 0.0;
    for (std::size_t i = begin; i < end; ++i) total += by_pos[i].y - mean;
    const double base = total * total / static_cast<double>(n);

    Split best;
    for (std::uint32_t f : draw_feature_subset(cols_, params_.feature_subset, rng_)) {
      const Entry* e = cols_data_[f].data();
      double sum_left = 0.0;
      for (std::size_t i = begin; i + 1 < end; ++i) {
        sum_left += e[i].y - mean;
        const double xv = e[i].x;
        const double xn = e[i + 1].x;
        if (!(xn > xv)) continue;
        const std::size_t n_left = i - begin + 1;
        const std::size_t n_right = n - n_left;
        if (n_left < leaf || n_right < leaf) continue;
        const double sum_right = total - sum_left;
        const double gain = sum_left * sum_left / static_cast<double>(n_left) +
                            sum_right * sum_right / static_cast<double>(n_right) - base;
        if (gain > best.gain) {
          double mid = 0.5 * (xv + xn);
          if (!(mid < xn)) mid = xv;
          best = {static_cast<int>(f), mid, gain, n_left};
        }
      }
    }
    return best;
  }

  void partition(std::size_t begin, std::size_t end, const Split& split, bool positions_only) {
    const auto& chosen = cols_data_[split.feature];
    for (std::size_t i = begin; i < end; ++i) goes_left_[chosen[i].pos] = (i - begin) < split.n_left;
    for (std::size_t c = positions_only ? cols_ : 0; c <= cols_; ++c) {
      auto& column = cols_data_[c];
      std::size_t l = begin;
      std::size_t r = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const Entry e = column[i];
        if (goes_left_[e.pos]) {
          column[l++] = e;
        } else {
          buffer_[r++] = e;
        }
      }
      std::copy(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(r), column.begin() + static_cast<std::ptrdiff_t>(l));
    }
  }

  struct Entry {
    double x;
    double y;
    std::uint32_t pos;
  };

  const TreeParams& params_;
  Pcg32& rng_;
  std::size_t cols_;
  std::vector<double> y_;
  struct Workspace {
    std::vector<std::vector<Entry>> columns;
    std::vector<Entry> buffer;
  };
  static Workspace& workspace() {
    thread_local Workspace ws;
    return ws;
  }
  std::vector<std::vector<Entry>>& cols_data_ = workspace().columns;
  std::vector<Entry>& buffer_ = workspace().buffer;
  std::vector<std::uint8_t> goes_left_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

RegressionTree fit_tree(const Matrix& x, const ColumnOrder& order, std::span<const double> y,
                        std::span<const std::uint32_t> counts, const TreeParams& params, Pcg32& rng) {
  if (y.size() != x.rows) throw std::invalid_argument("target length does not match rows");
  if (order.cols() != x.cols) throw std::invalid_argument("column order does not match matrix");
  return Builder(x, order, y, counts, params, rng).run();
}

RegressionTree fit_tree(const Matrix& x, std::span<const double> y, const TreeParams& params, Pcg32& rng) {
  const ColumnOrder order(x);
  return fit_tree(x, order, y, {}, params, rng);
}

}  // namespace floodline::ml
