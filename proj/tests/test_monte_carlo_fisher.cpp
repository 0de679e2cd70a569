#include <cmath>

#include <gtest/gtest.h>

#include "coopnlos/crlb.hpp"
#include "coopnlos/monte_carlo_fisher.hpp"

using namespace coopnlos;

namespace {

MixtureNoiseModel gaussian(double sigma) {
  return {1.0, ComponentDistribution::gaussian(0.0, sigma), ComponentDistribution::gaussian(0.0, sigma)};
}

MixtureNoiseModel mixture() {
  return {0.5, ComponentDistribution::gaussian(0.0, 1.0), ComponentDistribution::positive_mean_gaussian(5.0, 5.0)};
}

void expect_within_3se(const Eigen::MatrixXd& analytic, const EmpiricalFisher& e) {
  ASSERT_EQ(analytic.rows(), e.fisher.rows());
  for (int i = 0; i < analytic.rows(); ++i) {
    for (int j = 0; j < analytic.cols(); ++j) {
      EXPECT_LE(std::abs(e.fisher(i, j) - analytic(i, j)), std::max(3.0 * e.standard_error(i, j), 1e-9))
          << "entry (" << i << ", " << j << ")";
    }
  }
}

Network three_nodes() {
  Network net;
  net.agents = {Vec2(0, 0), Vec2(12, 5)};
  net.anchors = {Vec2(-3, 9)};
  net.edges = {{0, 1}, {0, 2}, {1, 2}};
  return net;
}

}  // namespace

TEST(MonteCarloFisher, GaussianSingleLink) {
  Network net;
  net.agents = {Vec2::Zero()};
  net.anchors = {Vec2(10 * std::cos(0.5), 10 * std::sin(0.5))};
  net.edges = {{0, 1}};
  const double sigma = 2.0;
  const auto e = monte_carlo_fisher(static_likelihood(net, gaussian(sigma), gaussian(sigma)), 200000, 1);
  const Vec2 b(std::cos(0.5), std::sin(0.5));
  expect_within_3se(b * b.transpose() / (sigma * sigma), e);
  for (int k = 0; k < 2; ++k) EXPECT_LE(std::abs(e.score_mean(k)), 3.0 * e.score_se(k));
}

TEST(MonteCarloFisher, MixtureSingleLinkMatchesG) {
  Network net;
  net.agents = {Vec2::Zero()};
  net.anchors = {Vec2(7, 0)};
  net.edges = {{0, 1}};
  const auto e = monte_carlo_fisher(static_likelihood(net, mixture(), mixture()), 400000, 2);
  EXPECT_LE(std::abs(e.fisher(0, 0) - compute_g(mixture())), 3.0 * e.standard_error(0, 0));
}

TEST(MonteCarloFisher, StaticThreeNodeGaussianAndMixture) {
  const Network net = three_nodes();
  for (const auto& noise : {gaussian(1.0), mixture()}) {
    const auto e = monte_carlo_fisher(static_likelihood(net, noise, noise), 200000, 3);
    expect_within_3se(fisher_static(net, compute_g(noise)), e);
  }
}

TEST(MonteCarloFisher, StaticWithSatelliteLink) {
  Network net = three_nodes();
  net.satellites = {Vec3(1e4, -5e3, 1.2e4)};
  net.sat_edges = {{1, 0}};
  const auto sat = gaussian(10.0);
  const auto e = monte_carlo_fisher(static_likelihood(net, gaussian(1.0), sat), 200000, 4);
  expect_within_3se(fisher_heterogeneous(net, 1.0, compute_g(sat)), e);
}

TEST(MonteCarloFisher, MobileTwoAgentsThreeEpochs) {
  std::vector<Network> epochs;
  for (int t = 0; t < 3; ++t) {
    Network net;
    net.agents = {Vec2(t * 1.3, 0.2 * t), Vec2(10 - t * 1.1, 4)};
    net.anchors = {Vec2(-5, 6), Vec2(8, -7)};
    net.edges = {{0, 1}, {0, 2}, {1, 3}};
    if (t == 1) net.edges.emplace_back(1, 2);
    epochs.push_back(net);
  }
  const double sigma_ins = 1.0, dt = 0.5;
  const auto e = monte_carlo_fisher(mobile_likelihood(epochs, gaussian(1.0), gaussian(1.0), sigma_ins, dt), 200000, 5);
  expect_within_3se(fisher_mobile(epochs, 1.0, 1.0, sigma_ins, dt), e);
  for (int k = 0; k < e.score_mean.size(); ++k) EXPECT_LE(std::abs(e.score_mean(k)), 3.0 * e.score_se(k));
}

TEST(MonteCarloFisher, NonFiniteLikelihoodRejected) {
  LikelihoodModel m;
  m.eta = Eigen::VectorXd::Zero(1);
  MixtureNoiseModel u{0.0, ComponentDistribution::gaussian(0.0, 1.0), ComponentDistribution::uniform(0.0, 1e-9)};
  m.terms.push_back({{0}, [](const Eigen::VectorXd& x) { return x(0); }, u});
  EXPECT_THROW(monte_carlo_fisher(m, 100, 1), NumericalError);
}
