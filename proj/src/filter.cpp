#include "coopnlos/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace coopnlos {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void normalize(Eigen::ArrayXd& log_weights) {
  const double lse = log_sum_exp(log_weights);
  if (std::isfinite(lse)) log_weights -= lse;
}

void fill_stationary(Eigen::ArrayX2d& table, const LosMarkov& chain, int rows) {
  table.resize(rows, 2);
  table.col(0).setConstant(1.0 - chain.alpha);
  table.col(1).setConstant(chain.alpha);
}

void reseed(ParticleCloud& cloud, const Vec2& center, double spread, const FilterConfig& config, Rng& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < cloud.size(); ++i) {
    cloud.particles(0, i) = center.x() + spread * unit(rng);
    cloud.particles(1, i) = center.y() + spread * unit(rng);
  }
  cloud.log_weights.setConstant(-std::log(static_cast<double>(cloud.size())));
  for (auto& [key, table] : cloud.links) {
    fill_stationary(table.posterior, key.kind == LinkKind::Vehicle ? config.vehicle_markov : config.sat_markov,
                    cloud.size());
  }
}

double reseed_spread(const PositionEstimate& est, const FilterConfig& config) {
  return std::max(config.reseed_spread_min, 2.0 * std::sqrt(est.variance));
}

// One pass over the epoch's links. Returns the number of links processed.
int apply_links(ParticleCloud& cloud, int epoch, std::span<const Observation> observations,
                const std::map<int, NeighborBelief>& beliefs, std::span<const Vec3> sat_enu,
                const FilterConfig& config, const FieldMetric& metric) {
  const int k = cloud.size();
  const Eigen::ArrayXd px = cloud.particles.row(0).transpose().array();
  const Eigen::ArrayXd py = cloud.particles.row(1).transpose().array();
  const Vec2 centre(px.mean(), py.mean());
  // Exact minimum image while the cloud spans less than half a period.
  const bool fast_wrap = (metric.period_x <= 0.0 || px.maxCoeff() - px.minCoeff() < 0.5 * metric.period_x) &&
                         (metric.period_y <= 0.0 || py.maxCoeff() - py.minCoeff() < 0.5 * metric.period_y);
  auto fold = [&](Eigen::ArrayXd& d, double period) {
    if (period <= 0.0) return;
    if (fast_wrap) {
      d = (d > 0.5 * period).select(d - period, (d < -0.5 * period).select(d + period, d));
    } else {
      d -= period * (d / period).round();
    }
  };
  int processed = 0;
  for (const auto& obs : observations) {
    if (obs.modality != Modality::Distance) throw ConfigError("particle filter supports distance measurements only");
    Eigen::ArrayXd dist;
    const MixtureNoiseModel* model = nullptr;
    MixtureNoiseModel widened;
    const LosMarkov* chain = nullptr;
    if (obs.kind == LinkKind::Vehicle) {
      auto it = beliefs.find(obs.other);
      if (it == beliefs.end()) continue;  // no broadcast heard from this neighbour yet
      // Minimum image relative to the cloud centre, then a single-period fold per particle.
      const Vec2 anchor = centre - metric.diff(centre, it->second.extrapolated(epoch, config.dt));
      Eigen::ArrayXd dx = px - anchor.x();
      Eigen::ArrayXd dy = py - anchor.y();
      fold(dx, metric.period_x);
      fold(dy, metric.period_y);
      dist = (dx.square() + dy.square()).sqrt();
      widened = config.vehicle_noise.widened(std::max(0.0, it->second.variance));
      model = &widened;
      chain = &config.vehicle_markov;
    } else {
      if (obs.other < 0 || obs.other >= static_cast<int>(sat_enu.size())) {
        throw ConfigError("observation references an unknown satellite");
      }
      const Vec3& s = sat_enu[obs.other];
      dist = ((px - s.x()).square() + (py - s.y()).square() + s.z() * s.z()).sqrt();
      model = &config.sat_noise;
      chain = &config.sat_markov;
    }

    const LinkKey key{obs.kind, obs.other};
    LinkTable& table = cloud.links[key];
    const Eigen::ArrayXd residual = obs.value - dist;
    Eigen::ArrayXd a = model->los.log_pdf(residual);
    Eigen::ArrayXd b = model->nlos.log_pdf(residual);
    if (table.last_epoch != epoch - 1 || table.posterior.rows() != k) {
      a += std::log(chain->alpha);
      b += std::log1p(-chain->alpha);
    } else {
      const auto& p = chain->transition;
      a += (p(0, 1) * table.posterior.col(0) + p(1, 1) * table.posterior.col(1)).log();
      b += (p(0, 0) * table.posterior.col(0) + p(1, 0) * table.posterior.col(1)).log();
    }

    // Two-term log-sum-exp with one exp and one log per particle; e is in [0, 1].
    const Eigen::ArrayXd m = a.max(b);
    const Eigen::ArrayXd d = a - b;
    const Eigen::ArrayXd e = (-d.abs()).exp();
    const Eigen::ArrayXd inv = (1.0 + e).inverse();
    const Eigen::ArrayXd p_los = (d >= 0.0).select(inv, e * inv);
    const Eigen::ArrayXd log_e = m + (1.0 + e).log();

    table.posterior.resize(k, 2);
    table.posterior.col(1) = p_los;
    table.posterior.col(0) = 1.0 - p_los;
    cloud.log_weights += log_e;
    for (int i = 0; i < k; ++i) {
      if (m(i) == kNegInf) {  // both hypotheses impossible: the particle dies
        cloud.log_weights(i) = kNegInf;
        table.posterior(i, 1) = chain->alpha;
        table.posterior(i, 0) = 1.0 - chain->alpha;
      }
    }
    table.last_epoch = epoch;
    ++processed;
  }
  return processed;
}

bool all_dead(const Eigen::ArrayXd& lw) {
  return (lw == kNegInf || lw.isNaN()).all();
}

}  // namespace

double log_sum_exp(const Eigen::ArrayXd& v) {
  if (v.size() == 0) return kNegInf;
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v - m).exp().sum());
}

void FilterConfig::validate() const {
  if (particles < 1) throw ConfigError("filter: particle count must be >= 1");
  if (!(ess_threshold > 0.0 && ess_threshold <= particles)) throw ConfigError("filter: need 0 < ESS threshold <= K");
  if (distinct_floor < 0) throw ConfigError("filter: distinct floor must be non-negative");
  if (!(dt > 0.0)) throw ConfigError("filter: dt must be positive");
  if (!(sigma_ins >= 0.0)) throw ConfigError("filter: sigma_ins must be non-negative");
  vehicle_noise.validate();
  sat_noise.validate();
}

ParticleCloud init_filter(int vehicle, const Vec2& prior_mean, double spread, const FilterConfig& config, Rng& rng) {
  if (config.particles < 1) throw ConfigError("filter: particle count must be >= 1");
  if (!(spread >= 0.0)) throw ConfigError("filter: prior spread must be non-negative");
  ParticleCloud cloud;
  cloud.vehicle = vehicle;
  cloud.particles.resize(2, config.particles);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < config.particles; ++i) {
    cloud.particles(0, i) = prior_mean.x() + (spread > 0.0 ? spread * unit(rng) : 0.0);
    cloud.particles(1, i) = prior_mean.y() + (spread > 0.0 ? spread * unit(rng) : 0.0);
  }
  cloud.log_weights = Eigen::ArrayXd::Constant(config.particles, -std::log(static_cast<double>(config.particles)));
  return cloud;
}

void predict(ParticleCloud& cloud, const Vec2& ins_reading, double dt, double sigma_ins, Rng& rng) {
  const Vec2 shift = ins_reading * dt;
  const double sd = sigma_ins * dt;
  cloud.particles.colwise() += shift;
  if (sd > 0.0) {
    std::normal_distribution<double> unit(0.0, sd);
    for (int i = 0; i < cloud.size(); ++i) {
      cloud.particles(0, i) += unit(rng);
      cloud.particles(1, i) += unit(rng);
    }
  }
  cloud.last_ins = ins_reading;
}

namespace {

// Brings every particle within half a period of the heaviest one, so a cloud
// that settles across the seam of a periodic axis stays contiguous.
void fold_onto(ParticleCloud& cloud, const FieldMetric& metric) {
  const double period[2] = {metric.period_x, metric.period_y};
  Eigen::Index best = 0;
  cloud.log_weights.maxCoeff(&best);
  for (int a = 0; a < 2; ++a) {
    if (!(period[a] > 0.0)) continue;
    auto row = cloud.particles.row(a).array();
    if (row.maxCoeff() - row.minCoeff() < 0.5 * period[a]) continue;
    const double ref = row(best);
    row = ref + (row - ref) - period[a] * ((row - ref) / period[a]).round();
  }
}

}  // namespace

UpdateReport update(ParticleCloud& cloud, int epoch, std::span<const Observation> observations,
                    const std::map<int, NeighborBelief>& beliefs, std::span<const Vec3> sat_enu,
                    const FilterConfig& config, const FieldMetric& metric, Rng& rng) {
  UpdateReport report;
  const PositionEstimate before = estimate(cloud);
  const Eigen::ArrayXd saved_weights = cloud.log_weights;

  report.links = apply_links(cloud, epoch, observations, beliefs, sat_enu, config, metric);
  if (report.links > 0 && all_dead(cloud.log_weights)) {
    // Every particle has zero likelihood; restart around the prior estimate.
    cloud.log_weights = saved_weights;
    for (auto& [key, table] : cloud.links) {
      if (table.last_epoch == epoch) table.last_epoch = epoch - 1;
    }
    reseed(cloud, before.mean, reseed_spread(before, config), config, rng);
    apply_links(cloud, epoch, observations, beliefs, sat_enu, config, metric);
    if (all_dead(cloud.log_weights)) cloud.log_weights.setConstant(-std::log(static_cast<double>(cloud.size())));
    report.recovered = true;
  }
  normalize(cloud.log_weights);
  fold_onto(cloud, metric);

  // Links absent this epoch lose their chain state.
  for (auto it = cloud.links.begin(); it != cloud.links.end();) {
    it = it->second.last_epoch == epoch ? std::next(it) : cloud.links.erase(it);
  }
  cloud.epoch = epoch;
  return report;
}

double effective_sample_size(const ParticleCloud& cloud) {
  const Eigen::ArrayXd lw = cloud.log_weights - log_sum_exp(cloud.log_weights);
  return 1.0 / (2.0 * lw).exp().sum();
}

ResampleReport resample(ParticleCloud& cloud, const FilterConfig& config, Rng& rng) {
  ResampleReport report;
  const int k = cloud.size();
  report.distinct = k;
  if (effective_sample_size(cloud) >= config.ess_threshold) return report;

  const PositionEstimate before = estimate(cloud);
  const Eigen::ArrayXd w = cloud.weights();
  std::vector<double> cumulative(k);
  double acc = 0.0;
  for (int i = 0; i < k; ++i) cumulative[i] = (acc += w(i));
  std::uniform_real_distribution<double> u(0.0, acc);
  std::vector<int> index(k);
  for (int i = 0; i < k; ++i) {
    const auto pos = std::upper_bound(cumulative.begin(), cumulative.end(), u(rng));
    index[i] = static_cast<int>(std::min<std::ptrdiff_t>(pos - cumulative.begin(), k - 1));
  }

  Eigen::Matrix2Xd particles(2, k);
  for (int i = 0; i < k; ++i) particles.col(i) = cloud.particles.col(index[i]);
  cloud.particles = std::move(particles);
  for (auto& [key, table] : cloud.links) {
    Eigen::ArrayX2d copy(k, 2);
    for (int i = 0; i < k; ++i) copy.row(i) = table.posterior.row(index[i]);
    table.posterior = std::move(copy);
  }
  cloud.log_weights.setConstant(-std::log(static_cast<double>(k)));
  report.resampled = true;
  report.distinct = static_cast<int>(std::set<int>(index.begin(), index.end()).size());

  if (report.distinct < config.distinct_floor) {
    reseed(cloud, before.mean, reseed_spread(before, config), config, rng);
    report.reseeded = true;
  }
  return report;
}

PositionEstimate estimate(const ParticleCloud& cloud) {
  PositionEstimate est;
  const Eigen::ArrayXd lw = cloud.log_weights - log_sum_exp(cloud.log_weights);
  const Eigen::VectorXd w = lw.exp().matrix();
  est.mean = cloud.particles * w;
  const Eigen::Matrix2Xd centered = cloud.particles.colwise() - est.mean;
  est.variance = 0.5 * (centered.array().square().rowwise() * w.transpose().array()).sum();
  est.velocity = cloud.last_ins;
  return est;
}

NeighborBelief make_belief(const ParticleCloud& cloud) {
  const auto est = estimate(cloud);
  return {cloud.vehicle, cloud.epoch, est.mean, est.variance, est.velocity};
}

}  // namespace coopnlos
