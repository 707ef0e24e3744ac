#include <doctest.h>

#include <cmath>

#include "floodline/errors.hpp"
#include "floodline/panorama.hpp"
#include "scratch.hpp"

using namespace floodline;
using namespace floodline::panorama;
using std::chrono::day;
using std::chrono::year;

namespace {

constexpr int kW = 2048;
constexpr int kH = 1024;
const geo::GeoPoint kCamera{29.7, -95.4};
const geo::GeoPoint kHouse{29.7 + 20.0 / 111195.0, -95.4};

constexpr double deg2rad(double d) { return d * M_PI / 180.0; }

// Door bottom at (1024, 611), roadside bottom at (1030, 700).
PanoramaObservation make_obs(double ce, double door_dh, double road_dh) {
  PanoramaObservation o;
  o.parcel_id = "P1";
  o.camera = kCamera;
  o.camera_elev_m = ce;
  o.yaw_deg = geo::bearing(kCamera, kHouse) - 180.0;
  o.width_px = kW;
  o.height_px = kH;
  o.acquired = year{2020} / 6 / day{1};
  const double door_pitch = (kH / 2.0 - 611) / kH * 180.0;
  const double road_pitch = (kH / 2.0 - 700) / kH * 180.0;
  o.depth = depth::DepthMatrix(30.0f);
  o.depth.set(152, 256, static_cast<float>(door_dh / std::sin(deg2rad(door_pitch))));
  o.depth.set(175, 257, static_cast<float>(road_dh / std::sin(deg2rad(road_pitch))));
  o.door_mask = geo::PixelMask({{1024, 600}, {1024, 611}});
  o.roadside_mask = geo::PixelMask({{1030, 690}, {1030, 700}});
  return o;
}

}  // namespace

TEST_SUITE("panorama") {
  TEST_CASE("date parsing") {
    CHECK(parse_date("2015-01-01") == year{2015} / 1 / day{1});
    CHECK(format_date(parse_date("2020-02-29")) == "2020-02-29");
    CHECK_THROWS_AS(parse_date("2019-02-29"), InputError);
    CHECK_THROWS_AS(parse_date("2020-1-01"), InputError);
    CHECK_THROWS_AS(parse_date("2020-01-01T00"), InputError);
  }

  TEST_CASE("screen status names round trip") {
    for (auto s : {ScreenStatus::accepted, ScreenStatus::rejected_date, ScreenStatus::rejected_distance,
                   ScreenStatus::rejected_no_structure, ScreenStatus::rejected_no_door, ScreenStatus::rejected_no_depth,
                   ScreenStatus::rejected_implausible}) {
      CHECK(parse_screen_status(to_string(s)) == s);
    }
  }

  TEST_CASE("lfe from a single door pixel") {
    const auto obs = make_obs(10.0, -1.5, -2.0);
    const auto est = estimate_lfe(obs, kHouse);
    REQUIRE(est.ok());
    CHECK(est.door_pixel_count == 1);
    CHECK(*est.lfe_m == doctest::Approx(8.5).epsilon(1e-6));
    CHECK(*est.roadside_elev_m == doctest::Approx(8.0).epsilon(1e-6));

    const auto e = evaluate(obs, kHouse, 9.0);
    CHECK(e.screen_status == ScreenStatus::accepted);
    CHECK(e.door_visible);
    CHECK(e.hdsl_m == doctest::Approx(0.5).epsilon(1e-6));
  }

  TEST_CASE("empty door mask") {
    auto obs = make_obs(10.0, -1.5, -2.0);
    obs.door_mask = geo::PixelMask{};
    const auto est = estimate_lfe(obs, kHouse);
    CHECK_FALSE(est.door_visible());
    CHECK(est.failure == LfeFailure::no_door_pixels);
    const auto e = evaluate(obs, kHouse, 8.5);
    CHECK(e.screen_status == ScreenStatus::rejected_no_door);
    CHECK_FALSE(e.door_visible);
  }

  TEST_CASE("door outside the window is not seen") {
    auto obs = make_obs(10.0, -1.5, -2.0);
    obs.door_mask = geo::PixelMask({{100, 611}});
    CHECK(evaluate(obs, kHouse, 8.5).screen_status == ScreenStatus::rejected_no_door);
  }

  TEST_CASE("missing depth at the only door pixel") {
    auto obs = make_obs(10.0, -1.5, -2.0);
    obs.depth.set(152, 256, NAN);
    const auto est = estimate_lfe(obs, kHouse);
    CHECK(est.door_visible());
    CHECK(est.failure == LfeFailure::no_door_depth);
    CHECK(evaluate(obs, kHouse, 8.5).screen_status == ScreenStatus::rejected_no_depth);
  }

  TEST_CASE("tier one screening") {
    auto obs = make_obs(10.0, -1.5, -2.0);
    obs.acquired = year{2014} / 12 / day{31};
    CHECK(evaluate(obs, kHouse, 8.5).screen_status == ScreenStatus::rejected_date);
    obs.acquired = year{2015} / 1 / day{1};
    CHECK(evaluate(obs, kHouse, 8.5).screen_status == ScreenStatus::accepted);

    const geo::GeoPoint far{29.7 + 60.0 / 111195.0, -95.4};
    CHECK(evaluate(obs, far, 8.5).screen_status == ScreenStatus::rejected_distance);

    obs.structure_detected = false;
    CHECK(evaluate(obs, kHouse, 8.5).screen_status == ScreenStatus::rejected_no_structure);
  }

  TEST_CASE("dem plausibility") {
    const auto obs = make_obs(10.0, -1.5, -2.0);
    CHECK(evaluate(obs, kHouse, 8.5 - 4.9).screen_status == ScreenStatus::accepted);
    CHECK(evaluate(obs, kHouse, 8.5 + 5.1).screen_status == ScreenStatus::rejected_implausible);
    CHECK(evaluate(obs, kHouse, std::nullopt).screen_status == ScreenStatus::rejected_implausible);
  }

  TEST_CASE("loosening thresholds never rejects an accepted panorama") {
    const auto obs = make_obs(10.0, -1.5, -2.0);
    ScreenThresholds strict;
    strict.max_dem_deviation_m = 1.0;
    strict.max_camera_distance_m = 25.0;
    for (double dem : {7.0, 8.0, 8.4, 9.2, 12.0}) {
      ScreenThresholds loose = strict;
      loose.max_dem_deviation_m = 10.0;
      loose.max_camera_distance_m = 100.0;
      loose.earliest = year{2000} / 1 / day{1};
      if (evaluate(obs, kHouse, dem, strict).screen_status == ScreenStatus::accepted) {
        CHECK(evaluate(obs, kHouse, dem, loose).screen_status == ScreenStatus::accepted);
      }
    }
  }

  TEST_CASE("validate rejects masks outside the image") {
    auto obs = make_obs(10.0, -1.5, -2.0);
    CHECK_NOTHROW(obs.validate());
    obs.door_mask = geo::PixelMask({{kW, 10}});
    CHECK_THROWS_AS(obs.validate(), InputError);
  }

  TEST_CASE("records and masks round trip through files") {
    const auto dir = scratch::temp_dir("pano");
    const auto obs = make_obs(10.0, -1.5, -2.0);
    depth::write_depth_file((dir / "d.b64").string(), obs.depth);
    write_mask_file((dir / "door.txt").string(), obs.door_mask);
    write_mask_file((dir / "road.txt").string(), obs.roadside_mask);
    PanoramaRecord rec;
    rec.parcel_id = "P1";
    rec.camera = obs.camera;
    rec.camera_elev_m = 10.0;
    rec.yaw_deg = obs.yaw_deg;
    rec.width_px = kW;
    rec.height_px = kH;
    rec.acquired = obs.acquired;
    rec.depth_file = "d.b64";
    rec.door_mask_file = "door.txt";
    rec.roadside_mask_file = "road.txt";
    write_panorama_records((dir / "p.jsonl").string(), {rec});

    const auto recs = read_panorama_records((dir / "p.jsonl").string(), dir.string());
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].yaw_deg == obs.yaw_deg);
    const auto loaded = load_observation(recs[0]);
    CHECK(loaded.door_mask.pixels() == obs.door_mask.pixels());
    CHECK(evaluate(loaded, kHouse, 8.5).hdsl_m == evaluate(obs, kHouse, 8.5).hdsl_m);
    CHECK(read_mask_file("").empty());
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("malformed metadata line reports the line") {
    const auto dir = scratch::temp_dir("pano_bad");
    scratch::write_text(dir / "p.jsonl", "\n{not json}\n");
    try {
      read_panorama_records((dir / "p.jsonl").string(), dir.string());
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    std::filesystem::remove_all(dir);
  }
}
