#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coopnlos/common.hpp"
#include "coopnlos/geometry.hpp"
#include "coopnlos/noise.hpp"
#include "coopnlos/orbit.hpp"

namespace coopnlos {

enum class Modality { Distance, Rss, Aoa };
std::string to_string(Modality m);
Modality modality_from_string(const std::string& name);

/// Ground-truth generation parameters. Internal units are SI; the config
/// loader converts degrees and mph at the boundary.
struct ScenarioConfig {
  int lane_count = 4;
  double lane_width = 4.0;
  double lane_length = 100.0;
  int vehicles_per_lane = 8;
  double mean_speed = 30.0 * kMph;
  double speed_jitter = 1.0;  // std of the per-vehicle speed draw, m/s
  double epoch_period = 0.1;
  int epochs = 100;
  double comm_radius = 50.0;
  double mask_angle_min = 55.0 * kDeg;
  double mask_angle_max = 85.0 * kDeg;
  double sigma_ins = 1.0;  // m/s per axis
  std::uint64_t seed = 1;

  MixtureNoiseModel noise{0.5, ComponentDistribution::gaussian(0.0, 1.0),
                          ComponentDistribution::positive_mean_gaussian(5.0, 5.0)};
  MixtureNoiseModel sat_noise{0.5, ComponentDistribution::gaussian(0.0, 10.0),
                              ComponentDistribution::positive_mean_gaussian(5.0, 5.0)};
  std::optional<double> p_stay_los;  // defaults to alpha (memoryless chain)

  Modality modality = Modality::Distance;
  double rss_exponent = 2.0;
  double rss_reference = 0.0;  // dB at 1 m

  double gps_time = 568800.0;
  std::string almanac = "gps";  // "gps", "galileo", "gps+galileo" or a file path
  double latitude = 0.0;
  double longitude = 0.0;

  void validate() const;
  int vehicle_count() const { return lane_count * vehicles_per_lane; }
  LosMarkov vehicle_markov() const;
  LosMarkov satellite_markov() const;
};

struct VehicleTrack {
  int id = 0;
  int lane = 0;  // 1-based
  double speed = 0.0;
  std::vector<Vec2> position;  // unwrapped; the road metric wraps x
  std::vector<Vec2> velocity;
  std::vector<Vec2> ins;       // velocity reading, true velocity + N(0, sigma_ins^2) per axis
};

struct ConnectivityGraph {
  int epoch = 0;
  std::vector<std::pair<int, int>> vehicle_edges;  // (a, b) with a < b
  std::vector<std::pair<int, int>> sat_edges;      // (vehicle, satellite index)

  bool has_vehicle_edge(int a, int b) const;
  std::vector<int> neighbours(int vehicle) const;
};

struct ScenarioTruth {
  ScenarioConfig config;
  FieldMetric metric;
  LocalFrame frame;
  SatelliteAlmanac almanac;
  std::vector<VehicleTrack> tracks;
  std::vector<std::vector<Vec3>> sat_enu;  // [epoch][satellite]
  std::vector<std::vector<double>> mask;   // [epoch][vehicle], rad
  std::vector<ConnectivityGraph> graphs;

  int epochs() const { return static_cast<int>(graphs.size()); }
  int vehicles() const { return static_cast<int>(tracks.size()); }
  std::vector<Vec2> positions(int epoch) const;
};

enum class LinkKind { Vehicle, Satellite };

/// One observation including the hidden LOS flag. Only the simulator and
/// diagnostics see this type; estimators receive `Observation`.
struct Measurement {
  int epoch = 0;
  int from = 0;  // vehicle id
  LinkKind kind = LinkKind::Vehicle;
  int to = 0;  // vehicle id or satellite index
  Modality modality = Modality::Distance;
  double value = 0.0;
  bool z_true = true;
};

struct Observation {
  int epoch = 0;
  LinkKind kind = LinkKind::Vehicle;
  int other = 0;  // neighbour id or satellite index
  Modality modality = Modality::Distance;
  double value = 0.0;
};

class MeasurementSet {
 public:
  MeasurementSet() = default;
  MeasurementSet(std::vector<Measurement> items, int epochs);

  const std::vector<Measurement>& items() const { return items_; }
  std::span<const Measurement> at_epoch(int epoch) const;
  /// Observations involving `vehicle` at `epoch`, LOS flag stripped.
  std::vector<Observation> observations(int vehicle, int epoch) const;

 private:
  std::vector<Measurement> items_;
  std::vector<std::size_t> offsets_;
};

std::vector<VehicleTrack> generate_road_scenario(const ScenarioConfig& config);

FieldMetric road_metric(const ScenarioConfig& config);

SatelliteAlmanac resolve_almanac(const std::string& spec);

ConnectivityGraph build_connectivity(int epoch, const std::vector<Vec2>& positions, double radius,
                                     const FieldMetric& metric, const std::vector<std::vector<int>>& visibility);

/// Tracks, satellites, per-vehicle masks and per-epoch graphs.
ScenarioTruth build_scenario(const ScenarioConfig& config);

/// Noise-free measurement function for a vehicle pair.
double vehicle_link_value(const ScenarioConfig& config, const FieldMetric& metric, const Vec2& a, const Vec2& b);
double satellite_range(const Vec2& vehicle, const Vec3& sat_enu);

MeasurementSet sample_measurements(const ScenarioTruth& truth, std::uint64_t seed);

}  // namespace coopnlos
