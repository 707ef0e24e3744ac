#include "floodline/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace floodline::ml {

Metrics metrics(std::span<const double> pred, std::span<const double> obs) {
  if (pred.size() != obs.size() || obs.empty()) throw std::invalid_argument("metrics need equal, non-empty inputs");
  const auto n = static_cast<double>(obs.size());
  double mean_obs = 0.0;
  for (double v : obs) mean_obs += v;
  mean_obs /= n;

  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    ss_res += (pred[i] - obs[i]) * (pred[i] - obs[i]);
    ss_tot += (obs[i] - mean_obs) * (obs[i] - mean_obs);
  }
  Metrics m;
  m.rmse = std::sqrt(ss_res / n);
  if (mean_obs != 0.0) m.rmse_pct = 100.0 * m.rmse / mean_obs;
  if (ss_tot > 0.0) m.r2 = 1.0 - ss_res / ss_tot;
  return m;
}

std::vector<std::vector<std::uint32_t>> kfold_partition(std::size_t n, std::size_t k, const RngStream& stream) {
  if (k == 0) throw std::invalid_argument("K must be positive");
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  Pcg32 rng = stream.engine();
  rng.shuffle(std::span<std::uint32_t>(idx));

  std::vector<std::vector<std::uint32_t>> folds(k);
  std::size_t cursor = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(cursor),
                    idx.begin() + static_cast<std::ptrdiff_t>(cursor + size));
    cursor += size;
  }
  return folds;
}

HoldoutSplit holdout_split(std::size_t n, const RngStream& stream, double validation_fraction) {
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  Pcg32 rng = stream.engine();
  rng.shuffle(std::span<std::uint32_t>(idx));

  std::size_t n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  if (n >= 2) n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  HoldoutSplit split;
  split.train.assign(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_val));
  split.validation.assign(idx.end() - static_cast<std::ptrdiff_t>(n_val), idx.end());
  return split;
}

std::optional<double> mean_fold_r2(std::span<const std::optional<double>> fold_r2) {
  double sum = 0.0;
  std::size_t defined = 0;
  for (const auto& r : fold_r2) {
    if (!r) continue;
    sum += *r;
    ++defined;
  }
  if (defined == 0) return std::nullopt;
  return sum / static_cast<double>(defined);
}

CvResult kfold_cv(const Matrix& x, std::span<const double> y, const Hyperparams& hyper, std::size_t k,
                  const RngStream& stream, Execution exec) {
  CvResult out;
  if (x.rows < k || k < 2) return out;
  const auto folds = kfold_partition(x.rows, k, stream.child("partition"));
  out.fold_r2.resize(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::uint32_t> train;
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train.begin(), train.end());
    std::vector<std::uint32_t> held = folds[f];
    std::sort(held.begin(), held.end());

    std::vector<double> y_train;
    for (auto r : train) y_train.push_back(y[r]);
    const auto model = fit_model(x.select_rows(train), y_train, hyper, stream.child(f), exec);

    std::vector<double> pred;
    std::vector<double> obs;
    for (auto r : held) {
      pred.push_back(model.predict(x.row(r)));
      obs.push_back(y[r]);
    }
    out.fold_r2[f] = metrics(pred, obs).r2;
  }
  out.r2_cv = mean_fold_r2(out.fold_r2);
  return out;
}

}  // namespace floodline::ml
