#include "floodline/risk.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "floodline/raster.hpp"
#include "floodline/stats.hpp"

namespace floodline::risk {

double ddf_feet(double depth_ft) {
  if (std::isnan(depth_ft)) throw std::invalid_argument("depth must not be NaN");
  const auto& c = kDepthDamageCurve;
  if (depth_ft <= c.front().depth_ft) return c.front().fraction;
  if (depth_ft >= c.back().depth_ft) return c.back().fraction;
  const auto hi = std::upper_bound(c.begin(), c.end(), depth_ft,
                                   [](double d, const ControlPoint& p) { return d < p.depth_ft; });
  const auto lo = hi - 1;
  if (depth_ft == lo->depth_ft) return lo->fraction;
  const double t = (depth_ft - lo->depth_ft) / (hi->depth_ft - lo->depth_ft);
  return lo->fraction + t * (hi->fraction - lo->fraction);
}

double ddf(double fdis_m) { return ddf_feet(fdis_m / raster::kFeetToMeters); }

double loss(double market_value_usd, double fdis_m) {
  if (!(fdis_m > 0.0)) return 0.0;
  return market_value_usd * ddf(fdis_m);
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::flooded:
      return "flooded";
    case Category::clearance:
      return "clearance";
    case Category::in_extent_no_lfe:
      return "in_extent_no_lfe";
    case Category::outside_extent:
      break;
  }
  return "outside_extent";
}

Category classify(std::optional<double> fdis_m, bool fathom_present) {
  if (!fathom_present) return Category::outside_extent;
  if (!fdis_m) return Category::in_extent_no_lfe;
  return *fdis_m > 0.0 ? Category::flooded : Category::clearance;
}

ValueFilterResult value_filter(std::span<const double> values) {
  ValueFilterResult out;
  if (values.empty()) return out;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  out.p1 = stats::quantile_sorted(sorted, 0.01);
  out.p99 = stats::quantile_sorted(sorted, 0.99);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < out.p1 || values[i] > out.p99) {
      out.dropped.push_back(i);
    } else {
      out.kept.push_back(i);
    }
  }
  return out;
}

void assess(AssessmentRecord& r) {
  r.fdis_m.reset();
  r.damage_fraction = 0.0;
  r.loss_usd = 0.0;
  const bool fathom_present = r.fathom_elev_m.has_value();
  if (fathom_present && r.hdsl_m && r.street_elev_m) r.fdis_m = fdis(*r.fathom_elev_m, *r.street_elev_m, *r.hdsl_m);
  r.category = classify(r.fdis_m, fathom_present);
  if (r.category == Category::flooded) {
    r.damage_fraction = ddf(*r.fdis_m);
    r.loss_usd = loss(r.assessed_value_usd, *r.fdis_m);
  }
}

bool Summary::partition_holds() const {
  std::size_t sum = 0;
  for (auto c : counts) sum += c;
  return sum == total;
}

Summary summarize(std::string aoi_id, std::span<const AssessmentRecord> records) {
  Summary s;
  s.aoi_id = std::move(aoi_id);
  s.total = records.size();
  std::vector<double> losses;
  std::vector<double> flooded_depths;
  std::vector<double> clearances;
  for (const auto& r : records) {
    ++s.counts[static_cast<std::size_t>(r.category)];
    if (r.category == Category::flooded) {
      s.total_loss_usd += r.loss_usd;
      losses.push_back(r.loss_usd);
      s.max_single_loss = std::max(s.max_single_loss, r.loss_usd);
      flooded_depths.push_back(*r.fdis_m);
    } else if (r.category == Category::clearance) {
      clearances.push_back(-*r.fdis_m);
    }
    if (r.fathom_positive) s.value_at_risk_usd += r.assessed_value_usd;
  }
  s.median_loss_damaged = stats::median_or_empty(losses);
  s.median_fdis_flooded = stats::median_or_empty(flooded_depths);
  s.median_clearance = stats::median_or_empty(clearances);
  return s;
}

std::vector<Summary> aggregate(std::span<const AssessmentRecord> records) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<AssessmentRecord>> by_aoi;
  for (const auto& r : records) {
    auto [it, inserted] = by_aoi.try_emplace(r.aoi_id);
    if (inserted) order.push_back(r.aoi_id);
    it->second.push_back(r);
  }
  std::vector<Summary> out;
  for (const auto& id : order) out.push_back(summarize(id, by_aoi[id]));

  // Regional values are folded from the AOI summaries so totals add up exactly.
  Summary regional = summarize(std::string(kRegional), records);
  regional.total_loss_usd = 0.0;
  regional.value_at_risk_usd = 0.0;
  for (const auto& s : out) {
    regional.total_loss_usd += s.total_loss_usd;
    regional.value_at_risk_usd += s.value_at_risk_usd;
  }
  out.push_back(std::move(regional));
  return out;
}

std::vector<AssessmentRecord> extracted_only(std::span<const AssessmentRecord> records) {
  std::vector<AssessmentRecord> out(records.begin(), records.end());
  for (auto& r : out) {
    if (r.hdsl_source != features::HdslSource::imputed) continue;
    r.hdsl_source = features::HdslSource::missing;
    r.hdsl_m.reset();
    assess(r);
  }
  return out;
}

std::vector<SensitivityRow> sensitivity(std::span<const AssessmentRecord> records) {
  const auto base = extracted_only(records);
  const auto a = aggregate(base);
  const auto b = aggregate(records);
  std::vector<SensitivityRow> out;
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back({a[i], b[i]});
  return out;
}

}  // namespace floodline::risk
