#include <cmath>

#include <gtest/gtest.h>

#include "coopnlos/orbit.hpp"
#include "coopnlos/scenario.hpp"

using namespace coopnlos;

TEST(Propagate, EquatorialOrbitStaysInPlane) {
  AlmanacEntry e;
  e.id = 1;
  e.semi_major_axis = 26'560e3;
  const auto pos = propagate_satellites({e}, 0.0, 100, 60.0);
  for (const auto& epoch : pos) {
    EXPECT_NEAR(epoch[0].z(), 0.0, 1e-6);
    EXPECT_NEAR(epoch[0].norm(), 26'560e3, 1e-3);
  }
  EXPECT_GT((pos.back()[0] - pos.front()[0]).norm(), 1e5);
}

TEST(Propagate, CircularOrbitRadiusConstant) {
  for (const auto& e : default_gps_almanac()) {
    const auto pos = propagate_satellites({e}, 568800.0, 200, 30.0);
    for (const auto& epoch : pos) EXPECT_LT(std::abs(epoch[0].norm() / e.semi_major_axis - 1.0), 1e-9);
  }
}

TEST(Propagate, SmallButNonzeroMotionOverARun) {
  const auto pos = propagate_satellites(default_gps_almanac(), 568800.0, 100, 0.1);
  for (std::size_t s = 0; s < pos[0].size(); ++s) {
    const double moved = (pos.back()[s] - pos.front()[s]).norm();
    EXPECT_GT(moved, 1e3);
    EXPECT_LT(moved, 1e5);
  }
}

TEST(Propagate, RejectsNonPositiveSemiMajorAxis) {
  AlmanacEntry e;
  e.semi_major_axis = 0.0;
  EXPECT_THROW(propagate_satellites({e}, 0.0, 1, 1.0), ConfigError);
}

TEST(Constellation, GpsSixToTwelveAboveHorizonAtEquator) {
  const LocalFrame frame{0.0, 0.0};
  const auto almanac = default_gps_almanac();
  ASSERT_EQ(almanac.size(), 24u);
  // One sample every 10 minutes over a full day.
  const auto pos = propagate_satellites(almanac, 0.0, 144, 600.0);
  for (const auto& epoch : pos) {
    std::vector<Vec3> enu;
    for (const auto& s : epoch) enu.push_back(frame.to_enu(s));
    const auto vis = visible_satellites(Vec2::Zero(), enu, 0.0);
    // Oracle: the elevation formula applied to every satellite.
    int count = 0;
    for (const auto& s : enu) count += std::asin(s.z() / s.norm()) >= 0.0;
    EXPECT_EQ(static_cast<int>(vis.size()), count);
    EXPECT_GE(count, 6);
    EXPECT_LE(count, 12);
  }
}

TEST(Constellation, GalileoHasTwentySevenSatellites) {
  const auto g = default_galileo_almanac();
  EXPECT_EQ(g.size(), 27u);
  EXPECT_EQ(g.front().id, 101);
}

TEST(Almanac, FormatParseRoundTrip) {
  const auto a = default_gps_almanac();
  const auto b = parse_almanac("# header\n" + format_almanac(a));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_NEAR(a[i].semi_major_axis, b[i].semi_major_axis, 1e-3);
    EXPECT_NEAR(a[i].raan, b[i].raan, 1e-12);
    EXPECT_NEAR(a[i].mean_anomaly, b[i].mean_anomaly, 1e-12);
  }
}

TEST(Almanac, RejectsMalformedLines) {
  EXPECT_THROW(parse_almanac("1 26560000 0.9"), ConfigError);
  EXPECT_THROW(parse_almanac("1 -5 0 0 0 0 0"), ConfigError);
}

TEST(Almanac, BundledFilesMatchDefaults) {
  const auto gps = load_almanac(std::filesystem::path(COOPNLOS_DATA_DIR) / "gps24.alm");
  const auto gal = load_almanac(std::filesystem::path(COOPNLOS_DATA_DIR) / "galileo27.alm");
  EXPECT_EQ(gps.size(), 24u);
  EXPECT_EQ(gal.size(), 27u);
  EXPECT_NEAR(gps[5].raan, default_gps_almanac()[5].raan, 1e-12);
}

TEST(Visibility, MaskAtZenithIsEmpty) {
  const std::vector<Vec3> sats = {{0, 0, 2e7}, {1e7, 0, 1e7}};
  EXPECT_TRUE(visible_satellites(Vec2::Zero(), sats, kPi / 2).empty());
}

TEST(Visibility, OverheadVisibleAtEightyFive) {
  const std::vector<Vec3> sats = {{10.0, -3.0, 2e7}};
  EXPECT_NEAR(elevation(Vec2(10.0, -3.0), sats[0]), kPi / 2, 1e-12);
  EXPECT_EQ(visible_satellites(Vec2(10.0, -3.0), sats, 85.0 * kDeg).size(), 1u);
}

TEST(Visibility, HalfASatellitePerEpochUnderDefaultMask) {
  ScenarioConfig cfg;
  cfg.epochs = 400;
  const auto truth = build_scenario(cfg);
  long pairs = 0, visible = 0;
  for (const auto& g : truth.graphs) {
    pairs += truth.vehicles();
    visible += static_cast<long>(g.sat_edges.size());
  }
  ASSERT_GE(pairs, 10000);
  EXPECT_NEAR(static_cast<double>(visible) / pairs, 0.5, 0.2);
}
