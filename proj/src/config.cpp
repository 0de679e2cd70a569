#include "coopnlos/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace coopnlos {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

ComponentDistribution parse_component(const json& j, const ComponentDistribution& def, const std::string& where) {
  check_keys(j, {"kind", "mean", "sigma", "lambda", "lo", "hi"}, where);
  std::string kind = to_string(def.kind());
  double mean = def.mean_param(), sigma = def.sigma(), lambda = def.lambda(), lo = def.lo(), hi = def.hi();
  read(j, "kind", kind);
  read(j, "mean", mean);
  read(j, "sigma", sigma);
  read(j, "lambda", lambda);
  read(j, "lo", lo);
  read(j, "hi", hi);
  switch (component_kind_from_string(kind)) {
    case ComponentKind::Gaussian: return ComponentDistribution::gaussian(mean, sigma);
    case ComponentKind::PositiveMeanGaussian: return ComponentDistribution::positive_mean_gaussian(mean, sigma);
    case ComponentKind::ExGaussian: return ComponentDistribution::ex_gaussian(mean, sigma, lambda);
    case ComponentKind::Uniform: return ComponentDistribution::uniform(lo, hi);
  }
  throw ConfigError(where + ": bad component kind");
}

MixtureNoiseModel parse_mixture(const json& j, MixtureNoiseModel m, std::optional<double>* p_stay,
                                const std::string& where) {
  check_keys(j, {"alpha", "los", "nlos", "p_stay_los"}, where);
  read(j, "alpha", m.alpha);
  if (j.contains("los")) m.los = parse_component(j["los"], m.los, where + ".los");
  if (j.contains("nlos")) m.nlos = parse_component(j["nlos"], m.nlos, where + ".nlos");
  if (j.contains("p_stay_los")) {
    if (!p_stay) throw ConfigError(where + ": p_stay_los belongs in the noise section");
    double v = 0.0;
    read(j, "p_stay_los", v);
    *p_stay = v;
  }
  m.validate();
  return m;
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace

MixtureNoiseModel parse_noise(const std::string& text, const MixtureNoiseModel& defaults) {
  return parse_mixture(parse_text(text), defaults, nullptr, "noise");
}

ExperimentSpec parse_experiment(const std::string& text) {
  const json j = parse_text(text);
  check_keys(j,
             {"lane_count", "lane_width", "lane_length", "vehicles_per_lane", "mean_speed", "mean_speed_mph",
              "speed_jitter", "epoch_period", "epochs", "comm_radius", "mask_angle_min_deg", "mask_angle_max_deg",
              "sigma_ins", "seed", "noise", "sat_noise", "modality", "rss_exponent", "rss_reference", "gps_time",
              "almanac", "latitude_deg", "longitude_deg", "filter", "experiment"},
             "config");
  ExperimentSpec spec;
  ScenarioConfig& s = spec.scenario;
  read(j, "lane_count", s.lane_count);
  read(j, "lane_width", s.lane_width);
  read(j, "lane_length", s.lane_length);
  read(j, "vehicles_per_lane", s.vehicles_per_lane);
  if (j.contains("mean_speed") && j.contains("mean_speed_mph")) {
    throw ConfigError("config: give mean_speed or mean_speed_mph, not both");
  }
  read(j, "mean_speed", s.mean_speed);
  if (j.contains("mean_speed_mph")) {
    double mph = 0.0;
    read(j, "mean_speed_mph", mph);
    s.mean_speed = mph * kMph;
  }
  read(j, "speed_jitter", s.speed_jitter);
  read(j, "epoch_period", s.epoch_period);
  read(j, "epochs", s.epochs);
  read(j, "comm_radius", s.comm_radius);
  double deg = 0.0;
  if (j.contains("mask_angle_min_deg")) {
    read(j, "mask_angle_min_deg", deg);
    s.mask_angle_min = deg * kDeg;
  }
  if (j.contains("mask_angle_max_deg")) {
    read(j, "mask_angle_max_deg", deg);
    s.mask_angle_max = deg * kDeg;
  }
  read(j, "sigma_ins", s.sigma_ins);
  read(j, "seed", s.seed);
  if (j.contains("noise")) s.noise = parse_mixture(j["noise"], s.noise, &s.p_stay_los, "noise");
  if (j.contains("sat_noise")) {
    MixtureNoiseModel base = s.sat_noise;
    base.alpha = s.noise.alpha;
    s.sat_noise = parse_mixture(j["sat_noise"], base, nullptr, "sat_noise");
  } else {
    s.sat_noise.alpha = s.noise.alpha;
  }
  if (j.contains("modality")) {
    std::string m;
    read(j, "modality", m);
    s.modality = modality_from_string(m);
  }
  read(j, "rss_exponent", s.rss_exponent);
  read(j, "rss_reference", s.rss_reference);
  read(j, "gps_time", s.gps_time);
  read(j, "almanac", s.almanac);
  if (j.contains("latitude_deg")) {
    read(j, "latitude_deg", deg);
    s.latitude = deg * kDeg;
  }
  if (j.contains("longitude_deg")) {
    read(j, "longitude_deg", deg);
    s.longitude = deg * kDeg;
  }

  if (j.contains("filter")) {
    const json& f = j["filter"];
    check_keys(f, {"particles", "ess_threshold", "distinct_floor", "reseed_spread_min", "prior_spread", "prior"},
               "filter");
    read(f, "particles", spec.filter.particles);
    read(f, "ess_threshold", spec.filter.ess_threshold);
    read(f, "distinct_floor", spec.filter.distinct_floor);
    read(f, "reseed_spread_min", spec.filter.reseed_spread_min);
    read(f, "prior_spread", spec.filter.prior_spread);
    read(f, "prior", spec.filter.prior);
  }
  if (j.contains("experiment")) {
    const json& e = j["experiment"];
    check_keys(e,
               {"name", "sweep", "values", "trials", "warmup", "crlb", "ls_baseline", "beliefs", "measurements"},
               "experiment");
    read(e, "name", spec.name);
    if (e.contains("sweep")) {
      std::string v;
      read(e, "sweep", v);
      spec.sweep = sweep_variable_from_string(v);
    }
    read(e, "values", spec.values);
    read(e, "trials", spec.trials);
    read(e, "warmup", spec.warmup);
    read(e, "crlb", spec.compute_crlb);
    read(e, "ls_baseline", spec.compute_ls);
    read(e, "beliefs", spec.write_beliefs);
    read(e, "measurements", spec.write_measurements);
  }
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_experiment(ss.str());
}

}  // namespace coopnlos
