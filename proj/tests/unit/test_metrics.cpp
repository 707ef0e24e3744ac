#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "floodline/metrics.hpp"

using namespace floodline;
using namespace floodline::ml;

TEST_SUITE("metrics") {
  TEST_CASE("metric examples") {
    const std::vector<double> obs = {0, 2};
    const std::vector<double> pred = {1, 1};
    const auto m = metrics(pred, obs);
    CHECK(m.rmse == 1.0);
    CHECK(*m.r2 == 0.0);
    CHECK(*m.rmse_pct == 100.0);

    const auto perfect = metrics(obs, obs);
    CHECK(perfect.rmse == 0.0);
    CHECK(*perfect.r2 == 1.0);

    const std::vector<double> flat = {3, 3, 3};
    CHECK_FALSE(metrics(flat, flat).r2.has_value());
    const std::vector<double> centered = {-1, 1};
    CHECK_FALSE(metrics(centered, centered).rmse_pct.has_value());
  }

  TEST_CASE("kfold sizes and coverage") {
    const auto folds = kfold_partition(13, 5, RngStream(3));
    std::vector<std::size_t> sizes;
    for (const auto& f : folds) sizes.push_back(f.size());
    CHECK(sizes == std::vector<std::size_t>{3, 3, 3, 2, 2});

    for (std::size_t n : {5u, 17u, 100u, 101u}) {
      for (std::size_t k : {2u, 5u}) {
        const auto parts = kfold_partition(n, k, RngStream(n * 31 + k));
        std::vector<int> seen(n, 0);
        std::size_t lo = n, hi = 0;
        for (const auto& f : parts) {
          lo = std::min(lo, f.size());
          hi = std::max(hi, f.size());
          for (auto i : f) ++seen[i];
        }
        CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
        CHECK(hi - lo <= 1);
      }
    }
  }

  TEST_CASE("holdout split") {
    const auto s = holdout_split(10, RngStream(1));
    CHECK(s.train.size() == 8);
    CHECK(s.validation.size() == 2);
    const auto tiny = holdout_split(2, RngStream(1));
    CHECK(tiny.train.size() == 1);
    CHECK(tiny.validation.size() == 1);
    std::vector<std::uint32_t> all = s.train;
    all.insert(all.end(), s.validation.begin(), s.validation.end());
    std::sort(all.begin(), all.end());
    for (std::uint32_t i = 0; i < 10; ++i) CHECK(all[i] == i);
  }

  TEST_CASE("undefined folds are left out of the mean") {
    const std::vector<std::optional<double>> f = {0.5, std::nullopt, 0.7};
    CHECK(*mean_fold_r2(f) == doctest::Approx(0.6).epsilon(1e-15));
    const std::vector<std::optional<double>> none = {std::nullopt};
    CHECK_FALSE(mean_fold_r2(none).has_value());
  }

  TEST_CASE("cv on a learnable target") {
    Matrix x(120, 1);
    std::vector<double> y;
    for (std::size_t r = 0; r < 120; ++r) {
      x(r, 0) = static_cast<double>(r % 4);
      y.push_back(3.0 * x(r, 0));
    }
    const auto cv = kfold_cv(x, y, {Algo::random_forest, 10}, 5, RngStream(2));
    REQUIRE(cv.r2_cv);
    CHECK(*cv.r2_cv == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(cv.fold_r2.size() == 5);

    Matrix small(3, 1);
    const std::vector<double> ys = {1, 2, 3};
    CHECK_FALSE(kfold_cv(small, ys, {Algo::random_forest, 2}, 5, RngStream(2)).r2_cv.has_value());
  }
}
