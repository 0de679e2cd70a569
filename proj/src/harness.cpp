#include "coopnlos/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "coopnlos/least_squares.hpp"

namespace coopnlos {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  int n = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      s += x;
      ++n;
    }
  }
  return n ? s / n : kNaN;
}

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const double pos = p * (v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open output file " + path.string());
  f << std::setprecision(10);
  return f;
}

std::vector<Network> networks_of(const ScenarioTruth& truth) {
  std::vector<Network> out(truth.epochs());
  for (int t = 0; t < truth.epochs(); ++t) {
    Network& n = out[t];
    n.agents = truth.positions(t);
    n.edges = truth.graphs[t].vehicle_edges;
    n.satellites = truth.sat_enu[t];
    n.sat_edges = truth.graphs[t].sat_edges;
    n.metric = truth.metric;
  }
  return out;
}

Vec2 uniform_point(Rng& rng, double side) {
  std::uniform_real_distribution<double> u(0.0, side);
  const double x = u(rng);
  return {x, u(rng)};
}

}  // namespace

FilterConfig FilterSettings::make(const ScenarioConfig& scenario) const {
  FilterConfig c;
  c.particles = particles;
  c.ess_threshold = ess_threshold;
  c.distinct_floor = distinct_floor;
  c.reseed_spread_min = reseed_spread_min;
  c.sigma_ins = scenario.sigma_ins;
  c.dt = scenario.epoch_period;
  c.vehicle_noise = scenario.noise;
  c.sat_noise = scenario.sat_noise;
  c.vehicle_markov = scenario.vehicle_markov();
  c.sat_markov = scenario.satellite_markov();
  c.validate();
  return c;
}

std::string to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::None: return "none";
    case SweepVariable::MaskAngle: return "mask_angle";
    case SweepVariable::SigmaR: return "sigma_r";
    case SweepVariable::Alpha: return "alpha";
    case SweepVariable::SigmaIns: return "sigma_ins";
    case SweepVariable::Radius: return "radius";
  }
  return "none";
}

SweepVariable sweep_variable_from_string(const std::string& name) {
  for (auto v : {SweepVariable::None, SweepVariable::MaskAngle, SweepVariable::SigmaR, SweepVariable::Alpha,
                 SweepVariable::SigmaIns, SweepVariable::Radius}) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown sweep variable '" + name + "' (mask_angle, sigma_r, alpha, sigma_ins, radius, none)");
}

void ExperimentSpec::validate() const {
  scenario.validate();
  if (trials < 1) throw ConfigError("experiment: trials must be >= 1");
  if (warmup < 0) throw ConfigError("experiment: warmup must be non-negative");
  if (sweep != SweepVariable::None && values.empty()) throw ConfigError("experiment: sweep value list is empty");
  if (!(filter.prior_spread >= 0.0)) throw ConfigError("experiment: prior spread must be non-negative");
  if (filter.prior != "truth" && filter.prior != "road") {
    throw ConfigError("experiment: prior must be 'truth' or 'road', got '" + filter.prior + "'");
  }
  if (scenario.modality != Modality::Distance) {
    throw ConfigError("experiment: unsupported modality '" + to_string(scenario.modality) +
                      "'; the filter and the bounds are implemented for distance only");
  }
  for (double v : values) apply_sweep(scenario, sweep, v).validate();
  filter.make(scenario);
}

std::vector<double> ExperimentSpec::points() const {
  if (sweep == SweepVariable::None) return {kNaN};
  return values;
}

ScenarioConfig apply_sweep(const ScenarioConfig& base, SweepVariable var, double value) {
  ScenarioConfig c = base;
  switch (var) {
    case SweepVariable::None: break;
    case SweepVariable::MaskAngle:
      c.mask_angle_min = c.mask_angle_max = value * kDeg;
      break;
    case SweepVariable::SigmaR:
      c.noise.los = ComponentDistribution::gaussian(c.noise.los.mean_param(), value);
      break;
    case SweepVariable::Alpha:
      c.noise.alpha = value;
      c.sat_noise.alpha = value;
      break;
    case SweepVariable::SigmaIns: c.sigma_ins = value; break;
    case SweepVariable::Radius: c.comm_radius = value; break;
  }
  return c;
}

std::vector<double> TrialResult::epoch_mean_error() const {
  std::vector<double> out(epochs());
  for (int t = 0; t < epochs(); ++t) out[t] = error.row(t).mean();
  return out;
}

std::vector<double> TrialResult::epoch_mse() const {
  std::vector<double> out(epochs());
  for (int t = 0; t < epochs(); ++t) out[t] = error.row(t).array().square().mean();
  return out;
}

std::uint64_t trial_seed(std::uint64_t base, int trial) {
  Rng r = make_stream(base, kTagTrial, static_cast<std::uint32_t>(trial));
  return r();
}

bool divergence_flag(const std::vector<double>& e, int warmup) {
  const int n = static_cast<int>(e.size()) - warmup;
  if (n < 4) return false;
  const int q = n / 4;
  double first = 0.0, last = 0.0;
  for (int i = 0; i < q; ++i) {
    first += e[warmup + i];
    last += e[e.size() - q + i];
  }
  return last > 3.0 * first;
}

std::optional<int> convergence_epoch(const std::vector<double>& e, bool diverged) {
  const int T = static_cast<int>(e.size());
  if (diverged || T < 5) return std::nullopt;
  const int q = std::max(1, T / 4);
  const double final_mean = std::accumulate(e.end() - q, e.end(), 0.0) / q;
  const int last_window = T - 5;
  std::optional<int> first_ok;
  for (int t = last_window; t >= 0; --t) {
    const double r = std::accumulate(e.begin() + t, e.begin() + t + 5, 0.0) / 5.0;
    if (r <= 2.0 * final_mean) {
      first_ok = t;
    } else {
      break;
    }
  }
  return first_ok;
}

TrialResult run_trial(const ExperimentSpec& spec, const ScenarioConfig& base, int trial, double sweep_value) {
  TrialResult r;
  r.trial = trial;
  r.sweep_value = sweep_value;
  r.seed = base.seed;
  const ScenarioConfig& cfg = base;
  const ScenarioTruth truth = build_scenario(cfg);
  const MeasurementSet ms = sample_measurements(truth, cfg.seed);
  const FilterConfig fc = spec.filter.make(cfg);
  const int T = truth.epochs(), N = truth.vehicles();

  r.error.resize(T, N);
  r.ess.resize(T, N);
  r.resampled.resize(T, N);
  r.distinct.resize(T, N);
  r.x_hat.resize(T, N);
  r.y_hat.resize(T, N);
  r.variance.resize(T, N);

  std::vector<ParticleCloud> clouds;
  std::map<int, NeighborBelief> beliefs;
  for (int v = 0; v < N; ++v) {
    Rng prior_rng = make_stream(cfg.seed, kTagPrior, v);
    if (spec.filter.prior == "road") {
      ParticleCloud cloud = init_filter(v, Vec2::Zero(), 0.0, fc, prior_rng);
      std::uniform_real_distribution<double> along(0.0, cfg.lane_length), across(0.0, cfg.lane_count * cfg.lane_width);
      for (int i = 0; i < cloud.size(); ++i) cloud.particles.col(i) = Vec2(along(prior_rng), across(prior_rng));
      clouds.push_back(std::move(cloud));
    } else {
      std::normal_distribution<double> unit(0.0, 1.0);
      const double s = spec.filter.prior_spread;
      const Vec2 center = truth.tracks[v].position[0] + s * Vec2(unit(prior_rng), unit(prior_rng));
      clouds.push_back(init_filter(v, center, s, fc, prior_rng));
    }
    clouds.back().last_ins = truth.tracks[v].ins[0];
    beliefs[v] = make_belief(clouds.back());
  }

  for (int t = 0; t < T; ++t) {
    std::map<int, NeighborBelief> next;
    for (int v = 0; v < N; ++v) {
      ParticleCloud& cloud = clouds[v];
      Rng rng = make_stream(cfg.seed, kTagFilter, v, t);
      if (t > 0) predict(cloud, truth.tracks[v].ins[t], fc.dt, fc.sigma_ins, rng);
      const auto obs = ms.observations(v, t);
      update(cloud, t, obs, beliefs, truth.sat_enu[t], fc, truth.metric, rng);
      r.ess(t, v) = effective_sample_size(cloud);
      const ResampleReport rr = resample(cloud, fc, rng);
      r.resampled(t, v) = rr.resampled ? 1 : 0;
      r.distinct(t, v) = rr.distinct;
      const PositionEstimate est = estimate(cloud);
      r.error(t, v) = truth.metric.distance(est.mean, truth.tracks[v].position[t]);
      r.x_hat(t, v) = est.mean.x();
      r.y_hat(t, v) = est.mean.y();
      r.variance(t, v) = est.variance;
      next[v] = make_belief(cloud);
    }
    beliefs = std::move(next);
  }

  const auto e = r.epoch_mean_error();
  {
    double s = 0.0;
    int n = 0;
    for (int t = std::min(spec.warmup, T - 1); t < T; ++t, ++n) s += e[t];
    r.mean_error = n ? s / n : kNaN;
  }
  r.average_ess = r.ess.mean();
  r.diverged = divergence_flag(e, spec.warmup);
  r.converged_epoch = convergence_epoch(e, r.diverged);

  r.crlb_causal.assign(T, kNaN);
  r.crlb_full.assign(T, kNaN);
  r.crlb_causal_min_eig.assign(T, kNaN);
  r.crlb_full_min_eig.assign(T, kNaN);
  if (spec.compute_crlb) {
    std::optional<double> g_veh, g_sat;
    try {
      g_veh = compute_g(cfg.noise);
      g_sat = compute_g(cfg.sat_noise);
    } catch (const NumericalError&) {
      // Bound undefined for this noise model; leave NaN.
    }
    if (g_veh && g_sat) {
      const CrlbSeries series = crlb_series(networks_of(truth), *g_veh, *g_sat, cfg.sigma_ins, cfg.epoch_period);
      for (int t = 0; t < T; ++t) {
        r.crlb_causal[t] = series.causal[t].trace;
        r.crlb_full[t] = series.smoothed[t].trace;
        r.crlb_causal_min_eig[t] = series.causal[t].min_eig;
        r.crlb_full_min_eig[t] = series.smoothed[t].min_eig;
      }
    }
  }

  r.ls_error.assign(T, kNaN);
  if (spec.compute_ls) {
    const Vec2 guess(0.5 * cfg.lane_length, 0.5 * cfg.lane_count * cfg.lane_width);
    double total = 0.0;
    for (int t = 0; t < T; ++t) {
      double s = 0.0;
      int n = 0;
      for (int v = 0; v < N; ++v) {
        std::vector<double> ranges;
        std::vector<Vec3> sats;
        for (const auto& o : ms.observations(v, t)) {
          if (o.kind != LinkKind::Satellite) continue;
          ranges.push_back(o.value);
          sats.push_back(truth.sat_enu[t][o.other]);
        }
        if (sats.size() < 2) continue;
        const auto fix = least_squares_fix(ranges, sats, guess);
        if (!fix.converged) continue;
        const double err = truth.metric.distance(fix.position, truth.tracks[v].position[t]);
        s += err;
        total += err;
        ++n;
        ++r.ls_fixes;
      }
      if (n) r.ls_error[t] = s / n;
    }
    r.ls_mean_error = r.ls_fixes ? total / r.ls_fixes : kNaN;
  }
  return r;
}

SweepPointSummary summarize(const std::vector<const TrialResult*>& trials, double value, int warmup) {
  SweepPointSummary s;
  s.value = value;
  std::vector<double> errors, causal, full, ess, conv;
  double ls_sum = 0.0;
  int ls_n = 0, diverged = 0, ok = 0;
  for (const auto* t : trials) {
    ++s.trials;
    if (t->failed) {
      ++s.failed;
      continue;
    }
    ++ok;
    const int T = t->epochs(), N = t->vehicles();
    for (int e = std::min(warmup, T - 1); e < T; ++e) {
      for (int v = 0; v < N; ++v) errors.push_back(t->error(e, v));
      if (std::isfinite(t->crlb_causal[e])) causal.push_back(t->crlb_causal[e] / N);
      if (std::isfinite(t->crlb_full[e])) full.push_back(t->crlb_full[e] / N);
    }
    ess.push_back(t->average_ess);
    if (t->diverged) ++diverged;
    if (t->converged_epoch) conv.push_back(*t->converged_epoch);
    if (std::isfinite(t->ls_mean_error)) {
      ls_sum += t->ls_mean_error;
      ++ls_n;
    }
  }
  s.mean_error = mean_of(errors);
  s.p05_error = percentile(errors, 0.05);
  s.p95_error = percentile(errors, 0.95);
  s.crlb_causal_rms = causal.empty() ? kNaN : std::sqrt(mean_of(causal));
  s.crlb_full_rms = full.empty() ? kNaN : std::sqrt(mean_of(full));
  s.average_ess = mean_of(ess);
  s.divergence_rate = ok ? static_cast<double>(diverged) / ok : kNaN;
  s.ls_mean_error = ls_n ? ls_sum / ls_n : kNaN;
  s.median_convergence = conv.empty() ? kNaN : percentile(conv, 0.5);
  return s;
}

RunResult run_experiment(const ExperimentSpec& spec, const std::optional<std::filesystem::path>& out) {
  spec.validate();
  RunResult result;
  result.spec = spec;
  const auto points = spec.points();
  for (int p = 0; p < static_cast<int>(points.size()); ++p) {
    const double value = points[p];
    ScenarioConfig cfg = apply_sweep(spec.scenario, spec.sweep, value);
    for (int k = 0; k < spec.trials; ++k) {
      cfg.seed = trial_seed(spec.scenario.seed, k);
      TrialResult tr;
      try {
        tr = run_trial(spec, cfg, k, value);
      } catch (const std::exception& ex) {
        tr.trial = k;
        tr.sweep_value = value;
        tr.seed = cfg.seed;
        tr.failed = true;
        tr.failure = ex.what();
      }
      if (out && !tr.failed) {
        const auto dir = *out / spec.name / format_value(value);
        const std::string stem = "trial_" + std::to_string(k);
        write_error_trace(dir / (stem + ".csv"), tr);
        if (spec.compute_crlb) write_crlb(dir / (stem + "_crlb.csv"), tr);
        if (spec.write_beliefs) write_beliefs(dir / (stem + "_beliefs.csv"), tr);
        if (spec.write_measurements) {
          const ScenarioTruth truth = build_scenario(cfg);
          write_measurements(dir / (stem + "_measurements.csv"), sample_measurements(truth, cfg.seed),
                             spec.debug_truth);
        }
      }
      result.trials.push_back(std::move(tr));
    }
  }
  for (double value : points) {
    std::vector<const TrialResult*> sel;
    for (const auto& t : result.trials) {
      if (t.sweep_value == value || (std::isnan(t.sweep_value) && std::isnan(value))) sel.push_back(&t);
    }
    result.summary.push_back(summarize(sel, value, spec.warmup));
  }
  if (out) write_summary(*out / spec.name / "summary.csv", result.summary);
  return result;
}

std::vector<NeffRow> neff_table(const ExperimentSpec& base, const std::vector<double>& sigmas) {
  ExperimentSpec spec = base;
  spec.sweep = SweepVariable::SigmaR;
  spec.values = sigmas;
  spec.compute_crlb = false;
  spec.compute_ls = false;
  const RunResult r = run_experiment(spec);
  std::vector<NeffRow> rows;
  for (const auto& s : r.summary) rows.push_back({s.value, s.average_ess, s.trials - s.failed});
  return rows;
}

std::vector<ScalingRow> anchor_scaling_experiment(const AnchorScalingParams& p) {
  if (p.agents < 1 || p.anchors < 0 || p.deployments < 1 || !(p.field > 0.0) || !(p.radius > 0.0)) {
    throw ConfigError("anchor scaling: invalid parameters");
  }
  const double rho = kPi * p.radius * p.radius / (p.field * p.field);
  if (rho > 1.0) throw ConfigError("anchor scaling: radius too large for the field (rho > 1)");
  Rng rng = make_stream(p.seed, kTagLayout);

  Network base;
  base.metric = FieldMetric::torus(p.field, p.field);
  Eigen::MatrixXd F;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 10000) throw NumericalError("anchor scaling: could not draw a localizable base network");
    base.agents.clear();
    base.anchors.clear();
    base.edges.clear();
    for (int i = 0; i < p.agents; ++i) base.agents.push_back(uniform_point(rng, p.field));
    for (int i = 0; i < p.anchors; ++i) base.anchors.push_back(uniform_point(rng, p.field));
    const int n = base.node_count();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (base.metric.distance(base.node(i), base.node(j)) <= p.radius) base.edges.emplace_back(i, j);
    F = fisher_static(base, 1.0);
    if (!crlb_trace(F).singular) break;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(F, Eigen::EigenvaluesOnly);

  std::vector<ScalingRow> rows;
  for (int added : p.added) {
    ScalingInputs in{es.eigenvalues(), rho, p.agents, p.anchors, 0, added, 1.0};
    double sum = 0.0;
    for (int d = 0; d < p.deployments; ++d) {
      Rng dep = make_stream(p.seed, kTagTrial, static_cast<std::uint32_t>(added), d);
      Eigen::MatrixXd Ft = F;
      const int n = p.agents;
      for (int a = 0; a < added; ++a) {
        const Vec2 pos = uniform_point(dep, p.field);
        for (int k = 0; k < n; ++k) {
          const Vec2 diff = base.metric.diff(base.agents[k], pos);
          const double r = diff.norm();
          if (r > p.radius || r == 0.0) continue;
          const double c = diff.x() / r, s = diff.y() / r;
          Ft(k, k) += c * c;
          Ft(n + k, n + k) += s * s;
          Ft(k, n + k) += c * s;
          Ft(n + k, k) += c * s;
        }
      }
      const CrlbResult cr = crlb_trace(Ft);
      if (cr.singular) throw NumericalError("anchor scaling: augmented Fisher matrix singular");
      sum += cr.trace;
    }
    ScalingRow row;
    row.added = added;
    row.predicted = anchor_scaling_prediction(in);
    row.empirical = sum / p.deployments;
    row.rel_err = std::abs(row.empirical / row.predicted - 1.0);
    rows.push_back(row);
  }
  return rows;
}

std::vector<ScalingRow> agent_scaling_experiment(const AgentScalingParams& p) {
  if (p.agents < 1 || p.anchors < 0 || p.deployments < 1 || !(p.field > 0.0) || !(p.rho > 0.0)) {
    throw ConfigError("agent scaling: invalid parameters");
  }
  const double radius = p.field * std::sqrt(p.rho / kPi);
  Rng rng = make_stream(p.seed, kTagLayout);
  Network base;
  base.metric = FieldMetric::torus(p.field, p.field);
  Eigen::MatrixXd F;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 1000) throw NumericalError("agent scaling: could not draw a localizable base network");
    base.agents.clear();
    base.anchors.clear();
    base.edges.clear();
    for (int i = 0; i < p.agents; ++i) base.agents.push_back(uniform_point(rng, p.field));
    for (int i = 0; i < p.anchors; ++i) base.anchors.push_back(uniform_point(rng, p.field));
    const int n = base.node_count();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (base.metric.distance(base.node(i), base.node(j)) <= radius) base.edges.emplace_back(i, j);
    F = fisher_static(base, 1.0);
    if (!crlb_trace(F).singular) break;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(F, Eigen::EigenvaluesOnly);
  const int n = p.agents;

  std::vector<ScalingRow> rows;
  for (int added : p.added) {
    ScalingInputs in{es.eigenvalues(), p.rho, p.agents, p.anchors, added, 0, 1.0};
    double predicted = 0.0;
    if (p.eigen_form) {
      predicted = agent_scaling_prediction(in);
    } else {
      const CrlbResult cr = crlb_trace(agent_scaling_matrix(F, in));
      if (cr.singular) throw NumericalError("agent scaling: predicted Fisher matrix singular");
      predicted = cr.trace;
    }
    double sum = 0.0;
    for (int d = 0; d < p.deployments; ++d) {
      Rng dep = make_stream(p.seed, kTagTrial, static_cast<std::uint32_t>(added), d);
      // New agents are appended after the original agents; anchors keep their
      // relative order, so ids shift by `added`.
      Network full;
      full.metric = base.metric;
      full.agents = base.agents;
      for (int a = 0; a < added; ++a) full.agents.push_back(uniform_point(dep, p.field));
      full.anchors = base.anchors;
      const int shift = added;
      for (auto [i, j] : base.edges) full.edges.emplace_back(i < n ? i : i + shift, j < n ? j : j + shift);
      for (int a = 0; a < added; ++a) {
        for (int k = 0; k < base.node_count(); ++k) {
          if (full.metric.distance(full.agents[n + a], base.node(k)) <= radius) {
            full.edges.emplace_back(n + a, k < n ? k : k + shift);
          }
        }
      }
      const Eigen::MatrixXd Ff = fisher_static(full, 1.0);
      // Reorder to [x_orig; y_orig; x_new; y_new] so the new agents trail.
      const int tot = n + added;
      Eigen::VectorXi order(2 * tot);
      for (int k = 0; k < n; ++k) {
        order(k) = k;
        order(n + k) = tot + k;
      }
      for (int a = 0; a < added; ++a) {
        order(2 * n + a) = n + a;
        order(2 * n + added + a) = tot + n + a;
      }
      Eigen::MatrixXd P(2 * tot, 2 * tot);
      for (int i = 0; i < 2 * tot; ++i)
        for (int j = 0; j < 2 * tot; ++j) P(i, j) = Ff(order(i), order(j));
      const CrlbResult cr = crlb_trace(schur_complement(P, 2 * added));
      if (cr.singular) throw NumericalError("agent scaling: Schur complement singular");
      sum += cr.trace;
    }
    ScalingRow row;
    row.added = added;
    row.predicted = predicted;
    row.empirical = sum / p.deployments;
    row.rel_err = std::abs(row.empirical / row.predicted - 1.0);
    rows.push_back(row);
  }
  return rows;
}

GridScenario make_toy_scenario(std::uint64_t seed, int epochs) {
  GridScenario sc;
  sc.anchors = {Vec2(15.0, 0.0), Vec2(-8.0, 12.0), Vec2(-6.0, -14.0)};
  sc.noise = MixtureNoiseModel{0.5, ComponentDistribution::gaussian(0.0, 1.0),
                               ComponentDistribution::positive_mean_gaussian(3.0, 2.0)};
  sc.markov = make_markov(0.5, 0.8);
  sc.step_sigma = 0.1;
  sc.prior_mean = Vec2(0.5, -0.5);
  sc.prior_spread = 1.0;
  sc.box_center = Vec2::Zero();
  sc.box_size = 20.0;
  sc.pitch = 0.05;

  Rng rng = make_stream(seed, kTagTrial);
  std::normal_distribution<double> unit(0.0, 1.0);
  Vec2 truth = sc.prior_mean + sc.prior_spread * Vec2(unit(rng), unit(rng));
  std::vector<bool> z(sc.anchors.size());
  sc.displacement.assign(epochs, Vec2::Zero());
  for (int t = 0; t < epochs; ++t) {
    if (t > 0) {
      sc.displacement[t] = Vec2(0.3, 0.1);
      truth += sc.displacement[t] + sc.step_sigma * Vec2(unit(rng), unit(rng));
    }
    std::vector<double> ranges;
    for (std::size_t l = 0; l < sc.anchors.size(); ++l) {
      z[l] = t == 0 ? sc.markov.draw_initial(rng) : sc.markov.step(z[l], rng);
      ranges.push_back((truth - sc.anchors[l]).norm() + sc.noise.sample(z[l], rng));
    }
    sc.ranges.push_back(ranges);
  }
  return sc;
}

double OracleComparison::max_gap() const { return gap.empty() ? 0.0 : *std::max_element(gap.begin(), gap.end()); }

OracleComparison compare_with_grid(const GridScenario& toy, int particles, std::uint64_t seed) {
  OracleComparison out;
  for (const auto& p : grid_oracle_filter(toy)) out.grid_mean.push_back(p.mean);

  FilterConfig fc;
  fc.particles = particles;
  fc.ess_threshold = 0.5 * particles;
  fc.distinct_floor = 10;
  fc.dt = 1.0;
  fc.sigma_ins = toy.step_sigma;
  fc.sat_noise = toy.noise;
  fc.sat_markov = toy.markov;
  fc.vehicle_noise = toy.noise;
  fc.vehicle_markov = toy.markov;
  fc.validate();

  std::vector<Vec3> anchors;
  for (const auto& a : toy.anchors) anchors.emplace_back(a.x(), a.y(), 0.0);
  Rng rng = make_stream(seed, kTagFilter);
  ParticleCloud cloud = init_filter(0, toy.prior_mean, toy.prior_spread, fc, rng);
  const std::map<int, NeighborBelief> none;
  for (int t = 0; t < static_cast<int>(toy.ranges.size()); ++t) {
    if (t > 0) {
      const Vec2 d = t < static_cast<int>(toy.displacement.size()) ? toy.displacement[t] : Vec2::Zero();
      predict(cloud, d, fc.dt, fc.sigma_ins, rng);
    }
    std::vector<Observation> obs;
    for (std::size_t l = 0; l < toy.anchors.size(); ++l) {
      obs.push_back({t, LinkKind::Satellite, static_cast<int>(l), Modality::Distance, toy.ranges[t][l]});
    }
    update(cloud, t, obs, none, anchors, fc, FieldMetric::plane(), rng);
    out.pf_mean.push_back(estimate(cloud).mean);
    resample(cloud, fc, rng);
  }
  for (std::size_t t = 0; t < out.pf_mean.size(); ++t) out.gap.push_back((out.pf_mean[t] - out.grid_mean[t]).norm());
  return out;
}

std::string format_value(double v) {
  if (std::isnan(v)) return "none";
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

void write_error_trace(const std::filesystem::path& path, const TrialResult& r) {
  auto f = open_csv(path);
  f << "epoch,vehicle,err_m,ess,resampled,neff_distinct\n";
  for (int t = 0; t < r.epochs(); ++t)
    for (int v = 0; v < r.vehicles(); ++v)
      f << t << ',' << v << ',' << r.error(t, v) << ',' << r.ess(t, v) << ',' << r.resampled(t, v) << ','
        << r.distinct(t, v) << '\n';
}

void write_beliefs(const std::filesystem::path& path, const TrialResult& r) {
  auto f = open_csv(path);
  f << "epoch,vehicle,x_hat,y_hat,var\n";
  for (int t = 0; t < r.epochs(); ++t)
    for (int v = 0; v < r.vehicles(); ++v)
      f << t << ',' << v << ',' << r.x_hat(t, v) << ',' << r.y_hat(t, v) << ',' << r.variance(t, v) << '\n';
}

void write_crlb(const std::filesystem::path& path, const TrialResult& r) {
  auto f = open_csv(path);
  f << "epoch,bound_kind,trace_m2,min_eig,singular_flag\n";
  for (int t = 0; t < r.epochs(); ++t) {
    const auto row = [&](const char* kind, double tr, double me) {
      f << t << ',' << kind << ',' << tr << ',' << me << ',' << (std::isfinite(tr) ? 0 : 1) << '\n';
    };
    row("full", r.crlb_full[t], r.crlb_full_min_eig[t]);
    row("causal", r.crlb_causal[t], r.crlb_causal_min_eig[t]);
  }
}

void write_measurements(const std::filesystem::path& path, const MeasurementSet& m, bool debug_truth) {
  auto f = open_csv(path);
  f << "epoch,from,to,modality,value" << (debug_truth ? ",z_true" : "") << '\n';
  for (const auto& x : m.items()) {
    f << x.epoch << ',' << x.from << ',' << (x.kind == LinkKind::Satellite ? "sat" : "veh") << x.to << ','
      << to_string(x.modality) << ',' << x.value;
    if (debug_truth) f << ',' << (x.z_true ? 1 : 0);
    f << '\n';
  }
}

void write_summary(const std::filesystem::path& path, const std::vector<SweepPointSummary>& rows) {
  auto f = open_csv(path);
  f << "sweep_value,trials,failed,mean_err_m,p05_err_m,p95_err_m,crlb_full_m,crlb_causal_m,avg_ess,"
       "divergence_rate,ls_mean_err_m,median_convergence_epoch\n";
  for (const auto& s : rows) {
    f << format_value(s.value) << ',' << s.trials << ',' << s.failed << ',' << s.mean_error << ',' << s.p05_error
      << ',' << s.p95_error << ',' << s.crlb_full_rms << ',' << s.crlb_causal_rms << ',' << s.average_ess << ','
      << s.divergence_rate << ',' << s.ls_mean_error << ',' << s.median_convergence << '\n';
  }
}

void write_scaling(const std::filesystem::path& path, const std::vector<ScalingRow>& rows) {
  auto f = open_csv(path);
  f << "m_tilde,predicted_trace,empirical_trace,rel_err\n";
  for (const auto& r : rows) f << r.added << ',' << r.predicted << ',' << r.empirical << ',' << r.rel_err << '\n';
}

void write_neff(const std::filesystem::path& path, const std::vector<NeffRow>& rows) {
  auto f = open_csv(path);
  f << "sigma_r,avg_ess,trials\n";
  for (const auto& r : rows) f << r.sigma_r << ',' << r.average_ess << ',' << r.trials << '\n';
}

}  // namespace coopnlos
