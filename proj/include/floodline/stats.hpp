#pragma once

#include <optional>
#include <span>
#include <vector>

namespace floodline::stats {

/// Sample quantile by linear interpolation between order statistics
/// (h = (n-1)p, the R "type 7" rule). Used for every quartile, percentile
/// and median in the pipeline. Requires non-empty input and p in [0, 1].
double quantile(std::span<const double> values, double p);

/// Same rule on input already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double p);

inline double median(std::span<const double> values) { return quantile(values, 0.5); }

struct Quartiles {
  double q1;
  double median;
  double q3;
  double iqr() const noexcept { return q3 - q1; }
};

Quartiles quartiles(std::span<const double> values);

double mean(std::span<const double> values);

/// Population standard deviation; 0 for fewer than two values.
double stddev(std::span<const double> values);

std::optional<double> median_or_empty(std::span<const double> values);

}  // namespace floodline::stats
