#include "coopnlos/monte_carlo_fisher.hpp"

#include <cmath>

namespace coopnlos {
namespace {

LikelihoodTerm range_term(const Network& net, int i, int j, int n, int offset, const MixtureNoiseModel& noise) {
  LikelihoodTerm term;
  term.noise = noise;
  const FieldMetric metric = net.metric;
  const Vec2 pi = net.node(i), pj = net.node(j);
  const bool ai = i < n, aj = j < n;
  if (ai) term.params.insert(term.params.end(), {offset + i, offset + n + i});
  if (aj) term.params.insert(term.params.end(), {offset + j, offset + n + j});
  term.predict = [=](const Eigen::VectorXd& eta) {
    const Vec2 a = ai ? Vec2(eta(offset + i), eta(offset + n + i)) : pi;
    const Vec2 b = aj ? Vec2(eta(offset + j), eta(offset + n + j)) : pj;
    return metric.distance(a, b);
  };
  return term;
}

LikelihoodTerm satellite_term(int k, const Vec3& sat, int n, int offset, const MixtureNoiseModel& noise) {
  LikelihoodTerm term;
  term.noise = noise;
  term.params = {offset + k, offset + n + k};
  term.predict = [=](const Eigen::VectorXd& eta) {
    return (Vec3(eta(offset + k), eta(offset + n + k), 0.0) - sat).norm();
  };
  return term;
}

void append_epoch(LikelihoodModel& model, const Network& net, int offset, const MixtureNoiseModel& vn,
                  const MixtureNoiseModel& sn) {
  const int n = net.agent_count();
  for (int k = 0; k < n; ++k) {
    model.eta(offset + k) = net.agents[k].x();
    model.eta(offset + n + k) = net.agents[k].y();
  }
  for (const auto& [i, j] : net.edges) {
    if (i >= n && j >= n) continue;
    model.terms.push_back(range_term(net, i, j, n, offset, vn));
  }
  for (const auto& [k, s] : net.sat_edges) model.terms.push_back(satellite_term(k, net.satellites[s], n, offset, sn));
}

double total_log_likelihood(const std::vector<LikelihoodTerm>& terms, const std::vector<double>& readings,
                            const std::vector<int>& which, const Eigen::VectorXd& eta) {
  double s = 0.0;
  for (int t : which) s += terms[t].noise.log_pdf(readings[t] - terms[t].predict(eta));
  return s;
}

}  // namespace

LikelihoodModel static_likelihood(const Network& net, const MixtureNoiseModel& vehicle_noise,
                                  const MixtureNoiseModel& sat_noise) {
  LikelihoodModel model;
  model.eta = Eigen::VectorXd::Zero(2 * net.agent_count());
  append_epoch(model, net, 0, vehicle_noise, sat_noise);
  return model;
}

LikelihoodModel mobile_likelihood(const std::vector<Network>& epochs, const MixtureNoiseModel& vehicle_noise,
                                  const MixtureNoiseModel& sat_noise, double sigma_ins, double dt) {
  if (epochs.empty()) throw ConfigError("mobile likelihood: no epochs");
  const int n = epochs.front().agent_count();
  const int block = 2 * n;
  const int T = static_cast<int>(epochs.size());
  LikelihoodModel model;
  model.eta = Eigen::VectorXd::Zero(block * T);
  for (int t = 0; t < T; ++t) append_epoch(model, epochs[t], t * block, vehicle_noise, sat_noise);
  if (T > 1) {
    MixtureNoiseModel ins{1.0, ComponentDistribution::gaussian(0.0, sigma_ins * dt),
                          ComponentDistribution::gaussian(0.0, sigma_ins * dt)};
    for (int t = 1; t < T; ++t) {
      for (int p = 0; p < block; ++p) {
        const int a = (t - 1) * block + p, b = t * block + p;
        LikelihoodTerm term;
        term.noise = ins;
        term.params = {a, b};
        term.predict = [a, b](const Eigen::VectorXd& eta) { return eta(b) - eta(a); };
        model.terms.push_back(std::move(term));
      }
    }
  }
  return model;
}

EmpiricalFisher monte_carlo_fisher(const LikelihoodModel& model, long samples, std::uint64_t seed) {
  if (samples < 2) throw ConfigError("monte_carlo_fisher: need at least 2 samples");
  const int dim = static_cast<int>(model.eta.size());
  const int nt = static_cast<int>(model.terms.size());

  // Terms touching each parameter; the score of eta_k involves only these.
  std::vector<std::vector<int>> touching(dim);
  for (int t = 0; t < nt; ++t)
    for (int p : model.terms[t].params) touching[p].push_back(t);

  std::vector<double> truth(nt);
  for (int t = 0; t < nt; ++t) truth[t] = model.terms[t].predict(model.eta);

  Rng rng = make_stream(seed, kTagTrial);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> readings(nt);
  Eigen::VectorXd eta = model.eta;
  Eigen::VectorXd score(dim);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(dim, dim), sum_sq = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd ssum = Eigen::VectorXd::Zero(dim), ssum_sq = Eigen::VectorXd::Zero(dim);

  for (long s = 0; s < samples; ++s) {
    for (int t = 0; t < nt; ++t) {
      const auto& nm = model.terms[t].noise;
      readings[t] = truth[t] + nm.sample(unit(rng) < nm.alpha, rng);
    }
    for (int k = 0; k < dim; ++k) {
      const double h = 1e-4 * std::max(1.0, std::abs(model.eta(k)));
      eta(k) = model.eta(k) + h;
      const double up = total_log_likelihood(model.terms, readings, touching[k], eta);
      eta(k) = model.eta(k) - h;
      const double dn = total_log_likelihood(model.terms, readings, touching[k], eta);
      eta(k) = model.eta(k);
      if (!std::isfinite(up) || !std::isfinite(dn)) throw NumericalError("monte_carlo_fisher: non-finite log-likelihood");
      score(k) = (up - dn) / (2.0 * h);
    }
    const Eigen::MatrixXd outer = score * score.transpose();
    sum += outer;
    sum_sq += outer.array().square().matrix();
    ssum += score;
    ssum_sq += score.array().square().matrix();
  }

  const double m = static_cast<double>(samples);
  EmpiricalFisher out;
  out.samples = samples;
  out.fisher = sum / m;
  out.standard_error = ((sum_sq / m - out.fisher.array().square().matrix()) / (m - 1.0)).cwiseMax(0.0).cwiseSqrt();
  out.score_mean = ssum / m;
  out.score_se = ((ssum_sq / m - out.score_mean.array().square().matrix()) / (m - 1.0)).cwiseMax(0.0).cwiseSqrt();
  return out;
}

}  // namespace coopnlos
