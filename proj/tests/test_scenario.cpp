#include <algorithm>
#include <cmath>
#include <set>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "coopnlos/scenario.hpp"

using namespace coopnlos;

namespace {

ScenarioConfig small_config() {
  ScenarioConfig cfg;
  cfg.epochs = 20;
  return cfg;
}

}  // namespace

TEST(RoadScenario, DefaultLayout) {
  const auto tracks = generate_road_scenario(ScenarioConfig{});
  ASSERT_EQ(tracks.size(), 32u);
  std::set<double> ys;
  for (const auto& t : tracks) ys.insert(t.position[0].y());
  EXPECT_EQ(ys, (std::set<double>{2.0, 6.0, 10.0, 14.0}));
  for (const auto& t : tracks) {
    const double dir = t.lane <= 2 ? 1.0 : -1.0;
    EXPECT_GE(dir * t.velocity[0].x(), 0.0);
    for (const auto& p : t.position) EXPECT_EQ(p.y(), t.position[0].y());
  }
}

TEST(RoadScenario, StaticVehicle) {
  ScenarioConfig cfg;
  cfg.lane_count = 1;
  cfg.vehicles_per_lane = 1;
  cfg.mean_speed = 0.0;
  cfg.speed_jitter = 0.0;
  cfg.epochs = 10;
  const auto tracks = generate_road_scenario(cfg);
  ASSERT_EQ(tracks.size(), 1u);
  for (const auto& p : tracks[0].position) EXPECT_EQ(p, tracks[0].position[0]);
  double s2 = 0.0;
  for (const auto& r : tracks[0].ins) s2 += r.squaredNorm();
  EXPECT_GT(s2, 0.0);
}

TEST(RoadScenario, ConstantSpeedKinematics) {
  ScenarioConfig cfg;
  cfg.mean_speed = 13.41;
  cfg.speed_jitter = 0.0;
  cfg.epochs = 5;
  for (const auto& t : generate_road_scenario(cfg)) {
    for (int k = 1; k < 5; ++k) EXPECT_NEAR(std::abs(t.position[k].x() - t.position[k - 1].x()), 1.341, 1e-12);
  }
}

TEST(RoadScenario, RejectsInvalidConfig) {
  ScenarioConfig cfg;
  cfg.vehicles_per_lane = 0;
  EXPECT_THROW(generate_road_scenario(cfg), ConfigError);
  cfg = ScenarioConfig{};
  cfg.epoch_period = 0.0;
  EXPECT_THROW(generate_road_scenario(cfg), ConfigError);
  cfg = ScenarioConfig{};
  cfg.mask_angle_max = 95.0 * kDeg;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(RoadScenario, KinematicConsistencyAndInsNoise) {
  ScenarioConfig cfg;
  cfg.epochs = 400;
  cfg.sigma_ins = 1.0;
  const auto tracks = generate_road_scenario(cfg);
  double sum = 0.0, sum2 = 0.0;
  long n = 0;
  for (const auto& t : tracks) {
    for (int k = 1; k < cfg.epochs; ++k) {
      const Vec2 step = t.position[k] - t.position[k - 1];
      EXPECT_LT((step - t.velocity[k] * cfg.epoch_period).norm(), 1e-12);
    }
    for (int k = 0; k < cfg.epochs; ++k) {
      const Vec2 w = t.ins[k] - t.velocity[k];
      for (double c : {w.x(), w.y()}) {
        sum += c;
        sum2 += c * c;
        ++n;
      }
    }
  }
  ASSERT_GE(n, 10000);
  EXPECT_NEAR(sum / n, 0.0, 3.0 / std::sqrt(static_cast<double>(n)));
  // Two-sided chi-square test on the sum of squares at the 1% level.
  boost::math::chi_squared chi(static_cast<double>(n));
  EXPECT_GT(sum2, boost::math::quantile(chi, 0.005));
  EXPECT_LT(sum2, boost::math::quantile(chi, 0.995));
}

TEST(RoadScenario, DeterministicForSeed) {
  const auto a = generate_road_scenario(small_config());
  const auto b = generate_road_scenario(small_config());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].position, b[i].position);
    EXPECT_EQ(a[i].ins, b[i].ins);
  }
}

TEST(Connectivity, ZeroRadiusHasNoEdges) {
  const std::vector<Vec2> pos = {{0, 0}, {1, 0}, {0, 1}};
  EXPECT_TRUE(build_connectivity(0, pos, 0.0, FieldMetric::plane(), {}).vehicle_edges.empty());
}

TEST(Connectivity, RadiusThreshold) {
  EXPECT_TRUE(build_connectivity(0, {{0, 0}, {49, 0}}, 50.0, FieldMetric::plane(), {}).has_vehicle_edge(0, 1));
  EXPECT_FALSE(build_connectivity(0, {{0, 0}, {51, 0}}, 50.0, FieldMetric::plane(), {}).has_vehicle_edge(0, 1));
  // Across the wrap of a 100 m torus, 90 m apart is 10 m apart.
  EXPECT_TRUE(build_connectivity(0, {{5, 0}, {95, 0}}, 50.0, FieldMetric::torus(100, 0), {}).has_vehicle_edge(1, 0));
}

TEST(Connectivity, EveryVehicleHasANeighbourInDefaultScenario) {
  const auto truth = build_scenario(ScenarioConfig{});
  for (const auto& g : truth.graphs) {
    for (int v = 0; v < truth.vehicles(); ++v) EXPECT_FALSE(g.neighbours(v).empty());
  }
}

TEST(Connectivity, EdgesMatchDistancesAndMasks) {
  const auto truth = build_scenario(small_config());
  for (const auto& g : truth.graphs) {
    const auto pos = truth.positions(g.epoch);
    for (int a = 0; a < truth.vehicles(); ++a) {
      for (int b = 0; b < truth.vehicles(); ++b) {
        if (a == b) continue;
        EXPECT_EQ(g.has_vehicle_edge(a, b), truth.metric.distance(pos[a], pos[b]) <= truth.config.comm_radius);
        EXPECT_EQ(g.has_vehicle_edge(a, b), g.has_vehicle_edge(b, a));
      }
    }
    for (const auto& [v, s] : g.sat_edges) {
      EXPECT_GE(elevation(pos[v], truth.sat_enu[g.epoch][s]), truth.mask[g.epoch][v]);
    }
    for (int v = 0; v < truth.vehicles(); ++v) {
      const double m = truth.mask[g.epoch][v];
      EXPECT_GE(m, 55.0 * kDeg);
      EXPECT_LE(m, 85.0 * kDeg);
      const auto expected = visible_satellites(pos[v], truth.sat_enu[g.epoch], m);
      int count = 0;
      for (const auto& e : g.sat_edges) count += e.first == v;
      EXPECT_EQ(count, static_cast<int>(expected.size()));
    }
  }
}

TEST(Measurements, NoiselessLosEqualsTrueDistance) {
  ScenarioConfig cfg = small_config();
  cfg.noise = {1.0, ComponentDistribution::gaussian(0.0, 1e-12), ComponentDistribution::gaussian(0.0, 1e-12)};
  cfg.sat_noise = cfg.noise;
  const auto truth = build_scenario(cfg);
  const auto ms = sample_measurements(truth, 7);
  ASSERT_FALSE(ms.items().empty());
  for (const auto& m : ms.items()) {
    const Vec2& a = truth.tracks[m.from].position[m.epoch];
    const double d = m.kind == LinkKind::Vehicle ? truth.metric.distance(a, truth.tracks[m.to].position[m.epoch])
                                                 : satellite_range(a, truth.sat_enu[m.epoch][m.to]);
    EXPECT_NEAR(m.value, d, 1e-6);
    EXPECT_TRUE(m.z_true);
  }
}

TEST(Measurements, NlosBiasMoment) {
  ScenarioConfig cfg;
  cfg.epochs = 25;
  cfg.noise = {0.0, ComponentDistribution::gaussian(0.0, 1.0), ComponentDistribution::positive_mean_gaussian(5.0, 5.0)};
  cfg.p_stay_los = std::nullopt;
  double s = 0.0;
  long n = 0;
  for (std::uint64_t seed = 1; n < 100000; ++seed) {
    cfg.seed = seed;
    const auto truth = build_scenario(cfg);
    const MeasurementSet ms = sample_measurements(truth, seed);
    for (const auto& m : ms.items()) {
      if (m.kind != LinkKind::Vehicle) continue;
      s += m.value - truth.metric.distance(truth.tracks[m.from].position[m.epoch], truth.tracks[m.to].position[m.epoch]);
      ++n;
    }
  }
  EXPECT_NEAR(s / n, 5.0, 0.05);
}

TEST(Measurements, PersistentChainStationaryFraction) {
  ScenarioConfig cfg;
  cfg.epochs = 1000;
  cfg.p_stay_los = 0.9;
  const auto truth = build_scenario(cfg);
  const auto ms = sample_measurements(truth, 3);
  long los = 0, n = 0;
  for (const auto& m : ms.items()) {
    if (m.kind != LinkKind::Vehicle) continue;
    los += m.z_true;
    ++n;
  }
  ASSERT_GE(n, 100000);
  EXPECT_NEAR(static_cast<double>(los) / n, 0.5, 0.01);
}

TEST(Measurements, BijectionWithEdges) {
  const auto truth = build_scenario(small_config());
  const auto ms = sample_measurements(truth, 5);
  for (const auto& g : truth.graphs) {
    const auto at = ms.at_epoch(g.epoch);
    std::set<std::pair<int, int>> veh, sat;
    for (const auto& m : at) {
      ASSERT_EQ(m.epoch, g.epoch);
      if (m.kind == LinkKind::Vehicle) {
        EXPECT_TRUE(g.has_vehicle_edge(m.from, m.to));
        EXPECT_TRUE(veh.insert(std::minmax(m.from, m.to)).second);
      } else {
        EXPECT_TRUE(sat.insert({m.from, m.to}).second);
      }
    }
    EXPECT_EQ(veh.size(), g.vehicle_edges.size());
    const std::set<std::pair<int, int>> expected(g.sat_edges.begin(), g.sat_edges.end());
    EXPECT_EQ(sat, expected);
  }
}

TEST(Measurements, ObservationsStripTruthAndCoverBothEnds) {
  const auto truth = build_scenario(small_config());
  const auto ms = sample_measurements(truth, 5);
  std::size_t total = 0;
  for (int v = 0; v < truth.vehicles(); ++v) total += ms.observations(v, 3).size();
  std::size_t expected = 0;
  for (const auto& m : ms.at_epoch(3)) expected += m.kind == LinkKind::Vehicle ? 2 : 1;
  EXPECT_EQ(total, expected);
}

TEST(Measurements, DeterministicForSeed) {
  const auto truth = build_scenario(small_config());
  const auto a = sample_measurements(truth, 9);
  const auto b = sample_measurements(truth, 9);
  ASSERT_EQ(a.items().size(), b.items().size());
  for (std::size_t i = 0; i < a.items().size(); ++i) EXPECT_EQ(a.items()[i].value, b.items()[i].value);
}
