#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "floodline/features.hpp"

namespace floodline::risk {

/// Residential no-basement depth-damage control points: depth in feet,
/// damage as a fraction of structure value.
struct ControlPoint {
  double depth_ft;
  double fraction;
};

inline constexpr std::array<ControlPoint, 13> kDepthDamageCurve = {{
    {-2.0, 0.000},
    {-1.0, 0.025},
    {0.0, 0.134},
    {1.0, 0.233},
    {2.0, 0.321},
    {3.0, 0.401},
    {4.0, 0.471},
    {5.0, 0.532},
    {6.0, 0.586},
    {7.0, 0.637},
    {8.0, 0.672},
    {12.0, 0.772},
    {16.0, 0.807},
}};

/// Damage fraction by linear interpolation in feet; 0 below -2 ft, 0.807 above 16 ft.
double ddf_feet(double depth_ft);

/// Damage fraction for an interior depth in meters (converted to feet first).
double ddf(double fdis_m);

/// Flood depth inside the structure: flood surface minus (street + HDSL).
constexpr double fdis(double fathom_elev_m, double street_elev_m, double hdsl_m) noexcept {
  return fathom_elev_m - (street_elev_m + hdsl_m);
}

/// value * ddf(fdis) for fdis > 0; no loss at or below the lowest floor.
double loss(double market_value_usd, double fdis_m);

enum class Category { flooded, clearance, in_extent_no_lfe, outside_extent };

std::string_view to_string(Category c);

/// Missing flood sample -> outside_extent; missing HDSL -> in_extent_no_lfe;
/// fdis > 0 -> flooded; otherwise clearance.
Category classify(std::optional<double> fdis_m, bool fathom_present);

/// Keeps parcels whose value lies within [P1, P99] of its AOI (type-7 percentiles).
/// Returns the indices of kept and dropped parcels.
struct ValueFilterResult {
  std::vector<std::size_t> kept;
  std::vector<std::size_t> dropped;
  double p1 = 0.0;
  double p99 = 0.0;
};
ValueFilterResult value_filter(std::span<const double> assessed_values);

struct AssessmentRecord {
  std::string parcel_id;
  std::string aoi_id;
  geo::GeoPoint centroid;
  features::HdslSource hdsl_source = features::HdslSource::missing;
  std::optional<double> hdsl_m;
  std::optional<double> street_elev_m;
  std::optional<double> fathom_elev_m;
  /// Raw flood layer sample > 0; counts the parcel toward value at risk.
  bool fathom_positive = false;
  std::optional<double> fdis_m;
  double damage_fraction = 0.0;
  double loss_usd = 0.0;
  double assessed_value_usd = 0.0;
  Category category = Category::outside_extent;
};

/// Fills fdis, damage, loss and category from the record's inputs.
void assess(AssessmentRecord& r);

struct Summary {
  std::string aoi_id;  ///< "REGIONAL" for the regional roll-up
  std::size_t total = 0;
  std::array<std::size_t, 4> counts{};  ///< indexed by Category
  double total_loss_usd = 0.0;
  std::optional<double> median_loss_damaged;
  double max_single_loss = 0.0;
  std::optional<double> median_fdis_flooded;
  std::optional<double> median_clearance;
  double value_at_risk_usd = 0.0;

  std::size_t count(Category c) const { return counts[static_cast<std::size_t>(c)]; }
  bool partition_holds() const;
};

Summary summarize(std::string aoi_id, std::span<const AssessmentRecord> records);

inline constexpr std::string_view kRegional = "REGIONAL";

/// One summary per AOI in first-seen order, followed by the regional summary.
std::vector<Summary> aggregate(std::span<const AssessmentRecord> records);

/// Copy of `records` with imputed parcels treated as lacking an LFE.
std::vector<AssessmentRecord> extracted_only(std::span<const AssessmentRecord> records);

struct SensitivityRow {
  Summary extracted_only;
  Summary combined;
  double loss_delta_usd() const { return combined.total_loss_usd - extracted_only.total_loss_usd; }
};

/// Aggregates twice (imputed parcels excluded / included), per AOI plus regional.
std::vector<SensitivityRow> sensitivity(std::span<const AssessmentRecord> records);

}  // namespace floodline::risk
