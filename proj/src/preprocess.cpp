#include "floodline/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "floodline/errors.hpp"
#include "floodline/stats.hpp"

namespace floodline::ml {

Dataset Dataset::subset(std::span<const std::uint32_t> rows) const {
  Dataset out;
  out.x = x.select_rows(rows);
  out.y.reserve(rows.size());
  out.ids.reserve(rows.size());
  for (auto r : rows) {
    if (!y.empty()) out.y.push_back(y[r]);
    if (!ids.empty()) out.ids.push_back(ids[r]);
  }
  return out;
}

Dataset clean_targets(const Dataset& rows, const CleaningRule& rule, std::vector<std::string>* dropped) {
  std::vector<std::uint32_t> keep;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double v = rows.y[i];
    if (std::isfinite(v) && v >= 0.0 && v <= rule.max_hdsl_m) {
      keep.push_back(static_cast<std::uint32_t>(i));
    } else if (dropped && i < rows.ids.size()) {
      dropped->push_back(rows.ids[i]);
    }
  }
  return rows.subset(keep);
}

std::string OutlierConfig::label() const {
  switch (kind) {
    case OutlierKind::none:
      return "none";
    case OutlierKind::percentile_clip_1_99:
      return "pct_clip_1_99";
    case OutlierKind::iqr_filter:
      break;
  }
  return fmt::format("iqr_{:.1f}", iqr_multiplier);
}

OutlierConfig OutlierConfig::parse(std::string_view label) {
  if (label == "none") return none();
  if (label == "pct_clip_1_99") return percentile_clip();
  if (label.starts_with("iqr_")) {
    const std::string k(label.substr(4));
    for (double m : {2.0, 2.5, 3.0, 4.0}) {
      if (fmt::format("{:.1f}", m) == k) return iqr(m);
    }
  }
  throw InputError("unknown outlier configuration '" + std::string(label) + "'");
}

std::vector<OutlierConfig> standard_outlier_configs() {
  return {OutlierConfig::none(), OutlierConfig::percentile_clip(), OutlierConfig::iqr(2.0),
          OutlierConfig::iqr(2.5), OutlierConfig::iqr(3.0), OutlierConfig::iqr(4.0)};
}

OutlierResult apply_outliers(const Dataset& rows, const OutlierConfig& cfg) {
  OutlierResult out;
  switch (cfg.kind) {
    case OutlierKind::none:
      out.rows = rows;
      return out;
    case OutlierKind::percentile_clip_1_99: {
      out.rows = rows;
      if (rows.y.empty()) return out;
      std::vector<double> sorted = rows.y;
      std::sort(sorted.begin(), sorted.end());
      const double lo = stats::quantile_sorted(sorted, 0.01);
      const double hi = stats::quantile_sorted(sorted, 0.99);
      for (double& v : out.rows.y) v = std::clamp(v, lo, hi);
      return out;
    }
    case OutlierKind::iqr_filter: {
      if (rows.size() < 4) {
        out.applicable = false;
        out.reason = fmt::format("{} needs at least 4 rows, have {}", cfg.label(), rows.size());
        return out;
      }
      const auto q = stats::quartiles(rows.y);
      const double lo = q.q1 - cfg.iqr_multiplier * q.iqr();
      const double hi = q.q3 + cfg.iqr_multiplier * q.iqr();
      std::vector<std::uint32_t> keep;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows.y[i] >= lo && rows.y[i] <= hi) keep.push_back(static_cast<std::uint32_t>(i));
      }
      out.rows = rows.subset(keep);
      return out;
    }
  }
  throw std::logic_error("unhandled outlier kind");
}

RobustScaler::RobustScaler(std::vector<double> median, std::vector<double> iqr)
    : median_(std::move(median)), iqr_(std::move(iqr)) {
  if (median_.size() != iqr_.size()) throw std::invalid_argument("scaler state size mismatch");
}

RobustScaler RobustScaler::fit(const Matrix& x) {
  if (x.rows == 0) throw std::invalid_argument("cannot fit scaler on zero rows");
  std::vector<double> med(x.cols);
  std::vector<double> iqr(x.cols);
  std::vector<double> column(x.rows);
  for (std::size_t c = 0; c < x.cols; ++c) {
    for (std::size_t r = 0; r < x.rows; ++r) column[r] = x(r, c);
    const auto q = stats::quartiles(column);
    med[c] = q.median;
    iqr[c] = std::max(0.0, q.iqr());
  }
  return RobustScaler(std::move(med), std::move(iqr));
}

void RobustScaler::transform_in_place(std::span<double> v) const {
  for (std::size_t c = 0; c < v.size(); ++c) v[c] = (v[c] - median_[c]) / divisor(c);
}

std::vector<double> RobustScaler::transform(std::span<const double> v) const {
  std::vector<double> out(v.begin(), v.end());
  transform_in_place(out);
  return out;
}

Matrix RobustScaler::transform(const Matrix& x) const {
  Matrix out = x;
  for (std::size_t r = 0; r < out.rows; ++r) transform_in_place(out.row(r));
  return out;
}

std::vector<double> RobustScaler::inverse(std::span<const double> v) const {
  std::vector<double> out(v.size());
  for (std::size_t c = 0; c < v.size(); ++c) out[c] = v[c] * divisor(c) + median_[c];
  return out;
}

}  // namespace floodline::ml
