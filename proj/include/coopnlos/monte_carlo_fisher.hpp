#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "coopnlos/crlb.hpp"
#include "coopnlos/noise.hpp"

namespace coopnlos {

/// One scalar reading theta = h(eta) + n with n drawn from `noise`.
/// `predict` reads the full parameter vector but depends only on `params`.
struct LikelihoodTerm {
  std::vector<int> params;
  std::function<double(const Eigen::VectorXd&)> predict;
  MixtureNoiseModel noise;
};

struct LikelihoodModel {
  Eigen::VectorXd eta;  // true parameters
  std::vector<LikelihoodTerm> terms;
};

/// Ranging likelihood of a static network in the static parameter ordering.
LikelihoodModel static_likelihood(const Network& net, const MixtureNoiseModel& vehicle_noise,
                                  const MixtureNoiseModel& sat_noise);

/// Space-time likelihood in the mobile ordering, dead-reckoning readings
/// included as Gaussian displacement terms.
LikelihoodModel mobile_likelihood(const std::vector<Network>& epochs, const MixtureNoiseModel& vehicle_noise,
                                  const MixtureNoiseModel& sat_noise, double sigma_ins, double dt);

struct EmpiricalFisher {
  Eigen::MatrixXd fisher;
  Eigen::MatrixXd standard_error;
  Eigen::VectorXd score_mean;
  Eigen::VectorXd score_se;
  long samples = 0;
};

/// Sample average of score outer products; the score comes from central
/// differences of the log-likelihood with step 1e-4 * max(1, |eta_k|).
EmpiricalFisher monte_carlo_fisher(const LikelihoodModel& model, long samples, std::uint64_t seed);

}  // namespace coopnlos
