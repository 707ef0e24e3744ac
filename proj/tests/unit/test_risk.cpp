#include <doctest.h>

#include <cmath>

#include "floodline/risk.hpp"
#include "oracles.hpp"

using namespace floodline;
using namespace floodline::risk;
using features::HdslSource;

namespace {

AssessmentRecord rec(std::string aoi, std::optional<double> fathom, std::optional<double> hdsl, double street,
                     double value, HdslSource src = HdslSource::extracted) {
  AssessmentRecord r;
  r.parcel_id = aoi + std::to_string(value);
  r.aoi_id = std::move(aoi);
  r.fathom_elev_m = fathom;
  r.fathom_positive = fathom.has_value();
  r.hdsl_m = hdsl;
  r.hdsl_source = hdsl ? src : HdslSource::missing;
  r.street_elev_m = street;
  r.assessed_value_usd = value;
  assess(r);
  return r;
}

}  // namespace

TEST_SUITE("risk") {
  TEST_CASE("fdis examples") {
    CHECK(fdis(3.0, 2.0, 0.5) == 0.5);
    CHECK(fdis(2.5, 2.0, 0.5) == 0.0);
    CHECK(fdis(2.0, 2.0, 1.10) == doctest::Approx(-1.10).epsilon(1e-15));
  }

  TEST_CASE("depth damage curve") {
    for (const auto& p : kDepthDamageCurve) CHECK(std::abs(ddf_feet(p.depth_ft) - p.fraction) <= 1e-12);
    CHECK(ddf(0.3048) == doctest::Approx(0.233).epsilon(1e-12));
    CHECK(ddf(-0.70) == 0.0);
    CHECK(ddf(5.5) == 0.807);
    CHECK(std::abs(ddf(0.4572) - 0.277) <= 1e-12);
    CHECK(ddf_feet(1.5) == 0.277);
    for (double d = -1.0; d <= 6.0; d += 0.0137) CHECK(ddf(d) == doctest::Approx(oracle::damage_fraction(d)).epsilon(1e-12));
  }

  TEST_CASE("loss") {
    CHECK(loss(200000, 0.3048) == doctest::Approx(46600).epsilon(1e-12));
    CHECK(loss(200000, -0.5) == 0.0);
    CHECK(loss(200000, 0.0) == 0.0);
    CHECK(loss(0, 2.0) == 0.0);
  }

  TEST_CASE("classification") {
    CHECK(classify(std::nullopt, false) == Category::outside_extent);
    CHECK(classify(0.4, false) == Category::outside_extent);
    CHECK(classify(std::nullopt, true) == Category::in_extent_no_lfe);
    CHECK(classify(0.0, true) == Category::clearance);
    CHECK(classify(1e-9, true) == Category::flooded);
  }

  TEST_CASE("value filter") {
    std::vector<double> v;
    for (int i = 1; i <= 200; ++i) v.push_back(i);
    const auto f = value_filter(v);
    CHECK(f.p1 == doctest::Approx(2.99).epsilon(1e-13));
    CHECK(f.p99 == doctest::Approx(198.01).epsilon(1e-13));
    CHECK(f.dropped == std::vector<std::size_t>{0, 1, 198, 199});
    CHECK(f.kept.size() == 196);

    const std::vector<double> same(100, 5.0);
    CHECK(value_filter(same).dropped.empty());
    const std::vector<double> one = {7.0};
    CHECK(value_filter(one).kept.size() == 1);
  }

  TEST_CASE("summaries") {
    CHECK(summarize("E", {}).total == 0);
    CHECK(summarize("E", {}).total_loss_usd == 0.0);

    const std::vector<AssessmentRecord> single = {rec("A", 5.0, 0.5, 3.0, 100000)};
    const auto s = summarize("A", single);
    CHECK(s.count(Category::flooded) == 1);
    CHECK(s.total_loss_usd == single[0].loss_usd);
    CHECK(*s.median_loss_damaged == single[0].loss_usd);
    CHECK(s.max_single_loss == single[0].loss_usd);
  }

  TEST_CASE("aggregation and sensitivity identities") {
    std::vector<AssessmentRecord> rs = {
        rec("A", 5.0, 0.5, 3.0, 100000),
        rec("A", 5.0, 3.0, 3.0, 200000),
        rec("A", std::nullopt, 0.5, 3.0, 150000),
        rec("B", 4.0, std::nullopt, 3.0, 120000),
        rec("B", 6.0, 0.2, 3.0, 300000, HdslSource::imputed),
        rec("B", 3.5, 1.0, 3.0, 90000, HdslSource::imputed),
    };
    const auto agg = aggregate(rs);
    REQUIRE(agg.size() == 3);
    CHECK(agg[2].aoi_id == kRegional);
    CHECK(agg[2].total == agg[0].total + agg[1].total);
    CHECK(agg[2].total_loss_usd == doctest::Approx(agg[0].total_loss_usd + agg[1].total_loss_usd).epsilon(1e-15));
    for (const auto& s : agg) CHECK(s.partition_holds());

    const auto sens = sensitivity(rs);
    REQUIRE(sens.size() == 3);
    CHECK(sens[0].loss_delta_usd() == 0.0);
    CHECK(sens[1].loss_delta_usd() > 0.0);
    for (const auto& row : sens) CHECK(row.combined.total_loss_usd >= row.extracted_only.total_loss_usd);
    const auto eo = extracted_only(rs);
    CHECK(eo[4].category == Category::in_extent_no_lfe);
    CHECK(eo[4].loss_usd == 0.0);
  }

  TEST_CASE("imputed parcels all in clearance change categories but not loss") {
    std::vector<AssessmentRecord> rs = {rec("C", 3.0, 1.0, 3.0, 100000, HdslSource::imputed)};
    const auto sens = sensitivity(rs);
    CHECK(sens[0].loss_delta_usd() == 0.0);
    CHECK(sens[0].combined.count(Category::clearance) == 1);
    CHECK(sens[0].extracted_only.count(Category::in_extent_no_lfe) == 1);
  }
}
