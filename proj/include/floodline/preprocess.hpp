#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "floodline/tree.hpp"

namespace floodline::ml {

/// Training or prediction rows: features, targets (unused for prediction
/// rows) and the parcel ids they belong to.
struct Dataset {
  Matrix x;
  std::vector<double> y;
  std::vector<std::string> ids;

  std::size_t size() const noexcept { return x.rows; }
  Dataset subset(std::span<const std::uint32_t> rows) const;
};

struct CleaningRule {
  double max_hdsl_m = 1000.0;
};

/// Keeps rows whose target is finite and within [0, max_hdsl_m]. Dropped ids
/// are appended to `dropped` when given.
Dataset clean_targets(const Dataset& rows, const CleaningRule& rule = {}, std::vector<std::string>* dropped = nullptr);

enum class OutlierKind { none, percentile_clip_1_99, iqr_filter };

struct OutlierConfig {
  OutlierKind kind = OutlierKind::none;
  double iqr_multiplier = 0.0;  ///< set only for iqr_filter

  static OutlierConfig none() { return {}; }
  static OutlierConfig percentile_clip() { return {OutlierKind::percentile_clip_1_99, 0.0}; }
  static OutlierConfig iqr(double k) { return {OutlierKind::iqr_filter, k}; }

  /// Stable text label: "none", "pct_clip_1_99", "iqr_2.0", ...
  std::string label() const;
  static OutlierConfig parse(std::string_view label);

  friend bool operator==(const OutlierConfig&, const OutlierConfig&) = default;
};

/// The six configurations searched by the tuning workflow, in search order.
std::vector<OutlierConfig> standard_outlier_configs();

struct OutlierResult {
  Dataset rows;
  bool applicable = true;
  std::string reason;  ///< why the configuration could not be applied
};

/// none: identity. percentile clip: targets winsorized to [P1, P99].
/// iqr_filter(k): rows outside [Q1 - k*IQR, Q3 + k*IQR] removed; needs >= 4 rows.
OutlierResult apply_outliers(const Dataset& rows, const OutlierConfig& cfg);

/// Per-feature (x - median) / IQR; zero-IQR features are only centered.
class RobustScaler {
 public:
  RobustScaler() = default;
  RobustScaler(std::vector<double> median, std::vector<double> iqr);

  static RobustScaler fit(const Matrix& x);

  std::vector<double> transform(std::span<const double> v) const;
  void transform_in_place(std::span<double> v) const;
  Matrix transform(const Matrix& x) const;
  std::vector<double> inverse(std::span<const double> v) const;

  const std::vector<double>& median() const noexcept { return median_; }
  const std::vector<double>& iqr() const noexcept { return iqr_; }
  bool empty() const noexcept { return median_.empty(); }

  friend bool operator==(const RobustScaler&, const RobustScaler&) = default;

 private:
  double divisor(std::size_t c) const noexcept { return iqr_[c] > 0.0 ? iqr_[c] : 1.0; }
  std::vector<double> median_;
  std::vector<double> iqr_;
};

}  // namespace floodline::ml
