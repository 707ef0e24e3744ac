#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "floodline/ensemble.hpp"
#include "floodline/rng.hpp"

namespace floodline::ml {

struct Metrics {
  double rmse = 0.0;
  std::optional<double> rmse_pct;  ///< absent when mean(obs) == 0
  std::optional<double> r2;  ///< absent when obs is constant
};

/// RMSE, RMSE as a percentage of mean(obs), and R^2 = 1 - SS_res/SS_tot.
Metrics metrics(std::span<const double> pred, std::span<const double> obs);

/// Seeded shuffle of [0, n) cut into K near-equal folds; the first n % K
/// folds get one extra row.
std::vector<std::vector<std::uint32_t>> kfold_partition(std::size_t n, std::size_t k, const RngStream& stream);

struct HoldoutSplit {
  std::vector<std::uint32_t> train;
  std::vector<std::uint32_t> validation;
};

/// Seeded shuffle; first 80% train, last 20% validation (at least one row each
/// when n >= 2).
HoldoutSplit holdout_split(std::size_t n, const RngStream& stream, double validation_fraction = 0.2);

struct CvResult {
  std::vector<std::optional<double>> fold_r2;
  std::optional<double> r2_cv;  ///< mean of defined fold R^2; absent when none is defined
};

/// Mean of the defined fold scores. Folds whose held-out targets are constant
/// have no R^2 and are left out of the average.
std::optional<double> mean_fold_r2(std::span<const std::optional<double>> fold_r2);

/// K-fold cross-validated R^2 of `hyper` on (x, y). Fold k's model uses
/// stream.child(k). Returns an empty result when n < K.
CvResult kfold_cv(const Matrix& x, std::span<const double> y, const Hyperparams& hyper, std::size_t k,
                  const RngStream& stream, Execution exec = Execution::serial);

}  // namespace floodline::ml
