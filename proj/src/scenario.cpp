#include "coopnlos/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

namespace coopnlos {

std::string to_string(Modality m) {
  switch (m) {
    case Modality::Distance: return "distance";
    case Modality::Rss: return "rss";
    case Modality::Aoa: return "aoa";
  }
  return "unknown";
}

Modality modality_from_string(const std::string& name) {
  if (name == "distance") return Modality::Distance;
  if (name == "rss") return Modality::Rss;
  if (name == "aoa") return Modality::Aoa;
  throw ConfigError("unknown modality '" + name + "'");
}

void ScenarioConfig::validate() const {
  if (lane_count <= 0) throw ConfigError("lane_count must be positive");
  if (vehicles_per_lane <= 0) throw ConfigError("vehicles_per_lane must be positive (zero vehicles)");
  if (!(lane_width > 0.0) || !(lane_length > 0.0)) throw ConfigError("lane dimensions must be positive");
  if (!(epoch_period > 0.0)) throw ConfigError("epoch_period must be positive");
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (!(mean_speed >= 0.0) || !(speed_jitter >= 0.0)) throw ConfigError("speeds must be non-negative");
  if (!(comm_radius >= 0.0)) throw ConfigError("comm_radius must be non-negative");
  if (!(mask_angle_min >= 0.0 && mask_angle_max <= kPi / 2 + 1e-12 && mask_angle_min <= mask_angle_max)) {
    throw ConfigError("mask angle range must lie within [0, 90] degrees");
  }
  if (!(sigma_ins >= 0.0)) throw ConfigError("sigma_ins must be non-negative");
  noise.validate();
  sat_noise.validate();
  vehicle_markov();
  satellite_markov();
}

LosMarkov ScenarioConfig::vehicle_markov() const { return make_markov(noise.alpha, p_stay_los.value_or(noise.alpha)); }

LosMarkov ScenarioConfig::satellite_markov() const {
  return make_markov(sat_noise.alpha, p_stay_los.value_or(sat_noise.alpha));
}

bool ConnectivityGraph::has_vehicle_edge(int a, int b) const {
  const auto key = std::minmax(a, b);
  return std::binary_search(vehicle_edges.begin(), vehicle_edges.end(), std::pair<int, int>(key.first, key.second));
}

std::vector<int> ConnectivityGraph::neighbours(int vehicle) const {
  std::vector<int> out;
  for (const auto& [a, b] : vehicle_edges) {
    if (a == vehicle) out.push_back(b);
    if (b == vehicle) out.push_back(a);
  }
  return out;
}

std::vector<Vec2> ScenarioTruth::positions(int epoch) const {
  std::vector<Vec2> out;
  out.reserve(tracks.size());
  for (const auto& t : tracks) out.push_back(t.position.at(epoch));
  return out;
}

MeasurementSet::MeasurementSet(std::vector<Measurement> items, int epochs) : items_(std::move(items)) {
  std::stable_sort(items_.begin(), items_.end(), [](const auto& a, const auto& b) { return a.epoch < b.epoch; });
  offsets_.assign(static_cast<std::size_t>(epochs) + 1, 0);
  std::size_t i = 0;
  for (int e = 0; e <= epochs; ++e) {
    while (i < items_.size() && items_[i].epoch < e) ++i;
    offsets_[e] = i;
  }
  offsets_[epochs] = items_.size();
}

std::span<const Measurement> MeasurementSet::at_epoch(int epoch) const {
  if (epoch < 0 || epoch + 1 >= static_cast<int>(offsets_.size())) return {};
  return {items_.data() + offsets_[epoch], offsets_[epoch + 1] - offsets_[epoch]};
}

std::vector<Observation> MeasurementSet::observations(int vehicle, int epoch) const {
  std::vector<Observation> out;
  for (const auto& m : at_epoch(epoch)) {
    if (m.from == vehicle) {
      out.push_back({m.epoch, m.kind, m.to, m.modality, m.value});
    } else if (m.kind == LinkKind::Vehicle && m.to == vehicle) {
      out.push_back({m.epoch, m.kind, m.from, m.modality, m.value});
    }
  }
  return out;
}

FieldMetric road_metric(const ScenarioConfig& config) { return FieldMetric::torus(config.lane_length, 0.0); }

std::vector<VehicleTrack> generate_road_scenario(const ScenarioConfig& config) {
  config.validate();
  std::vector<VehicleTrack> tracks;
  const int per_lane = config.vehicles_per_lane;
  const double spacing = config.lane_length / per_lane;
  const int forward_lanes = (config.lane_count + 1) / 2;
  for (int lane = 1; lane <= config.lane_count; ++lane) {
    const double direction = lane <= forward_lanes ? 1.0 : -1.0;
    const double y = (lane - 0.5) * config.lane_width;
    for (int j = 0; j < per_lane; ++j) {
      VehicleTrack t;
      t.id = static_cast<int>(tracks.size());
      t.lane = lane;
      auto layout = make_stream(config.seed, kTagLayout, t.id);
      auto speed_rng = make_stream(config.seed, kTagSpeed, t.id);
      const double jitter = std::uniform_real_distribution<double>(-0.25, 0.25)(layout) * spacing;
      const double x0 = (j + 0.5) * spacing + (per_lane > 1 ? jitter : 0.0);
      t.speed = config.speed_jitter > 0.0
                    ? std::max(0.0, std::normal_distribution<double>(config.mean_speed, config.speed_jitter)(speed_rng))
                    : config.mean_speed;
      const Vec2 v(direction * t.speed, 0.0);
      auto ins_rng = make_stream(config.seed, kTagIns, t.id);
      std::normal_distribution<double> ins_noise(0.0, 1.0);
      Vec2 p(x0, y);
      for (int k = 0; k < config.epochs; ++k) {
        if (k > 0) p += v * config.epoch_period;
        t.position.push_back(p);
        t.velocity.push_back(v);
        const Vec2 w(ins_noise(ins_rng), ins_noise(ins_rng));
        t.ins.push_back(v + config.sigma_ins * w);
      }
      tracks.push_back(std::move(t));
    }
  }
  return tracks;
}

SatelliteAlmanac resolve_almanac(const std::string& spec) {
  if (spec == "gps") return default_gps_almanac();
  if (spec == "galileo") return default_galileo_almanac();
  if (spec == "gps+galileo") {
    auto a = default_gps_almanac();
    auto b = default_galileo_almanac();
    a.insert(a.end(), b.begin(), b.end());
    return a;
  }
  if (spec == "none") return {};
  return load_almanac(spec);
}

ConnectivityGraph build_connectivity(int epoch, const std::vector<Vec2>& positions, double radius,
                                     const FieldMetric& metric, const std::vector<std::vector<int>>& visibility) {
  if (!(radius >= 0.0)) throw ConfigError("communication radius must be non-negative");
  ConnectivityGraph g;
  g.epoch = epoch;
  const int n = static_cast<int>(positions.size());
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (radius > 0.0 && metric.distance(positions[a], positions[b]) <= radius) g.vehicle_edges.emplace_back(a, b);
    }
  }
  for (int v = 0; v < static_cast<int>(visibility.size()); ++v) {
    for (int s : visibility[v]) g.sat_edges.emplace_back(v, s);
  }
  return g;
}

ScenarioTruth build_scenario(const ScenarioConfig& config) {
  config.validate();
  ScenarioTruth truth;
  truth.config = config;
  truth.metric = road_metric(config);
  truth.frame = LocalFrame{config.latitude, config.longitude};
  truth.almanac = resolve_almanac(config.almanac);
  truth.tracks = generate_road_scenario(config);

  const auto ecef = propagate_satellites(truth.almanac, config.gps_time, config.epochs, config.epoch_period);
  truth.sat_enu.resize(config.epochs);
  for (int k = 0; k < config.epochs; ++k) {
    for (const auto& s : ecef[k]) truth.sat_enu[k].push_back(truth.frame.to_enu(s));
  }

  const int n = truth.vehicles();
  truth.mask.assign(config.epochs, std::vector<double>(n, 0.0));
  for (int k = 0; k < config.epochs; ++k) {
    std::vector<std::vector<int>> visibility(n);
    const auto pos = truth.positions(k);
    for (int v = 0; v < n; ++v) {
      auto rng = make_stream(config.seed, kTagMask, v, k);
      const double mask =
          config.mask_angle_max > config.mask_angle_min
              ? std::uniform_real_distribution<double>(config.mask_angle_min, config.mask_angle_max)(rng)
              : config.mask_angle_min;
      truth.mask[k][v] = mask;
      visibility[v] = visible_satellites(pos[v], truth.sat_enu[k], mask);
    }
    truth.graphs.push_back(build_connectivity(k, pos, config.comm_radius, truth.metric, visibility));
  }
  return truth;
}

double vehicle_link_value(const ScenarioConfig& config, const FieldMetric& metric, const Vec2& a, const Vec2& b) {
  const Vec2 d = metric.diff(a, b);
  switch (config.modality) {
    case Modality::Distance: return d.norm();
    case Modality::Rss: return config.rss_reference - 10.0 * config.rss_exponent * std::log10(d.norm());
    case Modality::Aoa: return std::atan2(d.y(), d.x());
  }
  return d.norm();
}

double satellite_range(const Vec2& vehicle, const Vec3& sat_enu) {
  const Vec3 d(sat_enu.x() - vehicle.x(), sat_enu.y() - vehicle.y(), sat_enu.z());
  return d.norm();
}

MeasurementSet sample_measurements(const ScenarioTruth& truth, std::uint64_t seed) {
  const auto& cfg = truth.config;
  const LosMarkov veh_chain = cfg.vehicle_markov();
  const LosMarkov sat_chain = cfg.satellite_markov();
  // Last epoch each link was present and its z at that epoch.
  std::map<std::pair<int, int>, std::pair<int, bool>> veh_state, sat_state;
  auto advance = [](auto& state, std::pair<int, int> key, int epoch, const LosMarkov& chain, Rng& rng) {
    auto it = state.find(key);
    bool z;
    if (it != state.end() && it->second.first == epoch - 1) {
      z = chain.step(it->second.second, rng);
    } else {
      z = chain.draw_initial(rng);
    }
    state[key] = {epoch, z};
    return z;
  };

  std::vector<Measurement> out;
  for (const auto& g : truth.graphs) {
    const int k = g.epoch;
    for (const auto& [a, b] : g.vehicle_edges) {
      auto rng = make_stream(seed, kTagEdge, a, b, k);
      const bool z = advance(veh_state, {a, b}, k, veh_chain, rng);
      const double clean = vehicle_link_value(cfg, truth.metric, truth.tracks[a].position[k], truth.tracks[b].position[k]);
      out.push_back({k, a, LinkKind::Vehicle, b, cfg.modality, clean + cfg.noise.sample(z, rng), z});
    }
    for (const auto& [v, s] : g.sat_edges) {
      auto rng = make_stream(seed, kTagSatEdge, v, s, k);
      const bool z = advance(sat_state, {v, s}, k, sat_chain, rng);
      const double clean = satellite_range(truth.tracks[v].position[k], truth.sat_enu[k][s]);
      out.push_back({k, v, LinkKind::Satellite, s, Modality::Distance, clean + cfg.sat_noise.sample(z, rng), z});
    }
  }
  return MeasurementSet(std::move(out), truth.epochs());
}

}  // namespace coopnlos
