#pragma once

#include <compare>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "coopnlos/common.hpp"
#include "coopnlos/geometry.hpp"
#include "coopnlos/noise.hpp"
#include "coopnlos/scenario.hpp"

namespace coopnlos {

struct FilterConfig {
  int particles = 2000;
  double ess_threshold = 30.0;
  int distinct_floor = 10;
  double reseed_spread_min = 1.0;  // reseed spread is max(this, 2 * posterior std)
  double sigma_ins = 1.0;          // m/s per axis
  double dt = 0.1;
  MixtureNoiseModel vehicle_noise;
  MixtureNoiseModel sat_noise;
  LosMarkov vehicle_markov;
  LosMarkov sat_markov;

  void validate() const;
};

/// What a vehicle broadcasts each epoch.
struct NeighborBelief {
  int sender = 0;
  int epoch = 0;
  Vec2 position = Vec2::Zero();
  double variance = 0.0;  // m^2, trace of the 2x2 covariance over 2
  Vec2 velocity = Vec2::Zero();

  Vec2 extrapolated(int to_epoch, double dt) const { return position + velocity * ((to_epoch - epoch) * dt); }
};

struct LinkKey {
  LinkKind kind = LinkKind::Vehicle;
  int id = 0;
  auto operator<=>(const LinkKey&) const = default;
};

/// Per-particle normalized z posterior of one link; column 0 is NLOS, column 1 LOS.
struct LinkTable {
  Eigen::ArrayX2d posterior;
  int last_epoch = -1;
};

struct ParticleCloud {
  int vehicle = 0;
  int epoch = 0;
  Eigen::Matrix2Xd particles;
  Eigen::ArrayXd log_weights;  // normalized: logsumexp == 0
  std::map<LinkKey, LinkTable> links;
  Vec2 last_ins = Vec2::Zero();

  int size() const { return static_cast<int>(particles.cols()); }
  Eigen::ArrayXd weights() const { return log_weights.exp(); }
};

ParticleCloud init_filter(int vehicle, const Vec2& prior_mean, double spread, const FilterConfig& config, Rng& rng);

/// Moves every particle by reading * dt plus N(0, (sigma_ins * dt)^2) per axis.
/// Weights are untouched: the proposal is the transition prior.
void predict(ParticleCloud& cloud, const Vec2& ins_reading, double dt, double sigma_ins, Rng& rng);

struct UpdateReport {
  int links = 0;
  bool recovered = false;  // total evidence underflow forced a reseed
};

/// Link-wise forward recursion over each link's LOS/NLOS chain, conditioned on
/// each particle's trajectory; the per-link evidence multiplies into the weight.
/// `beliefs` holds the latest broadcast of every potential neighbour.
UpdateReport update(ParticleCloud& cloud, int epoch, std::span<const Observation> observations,
                    const std::map<int, NeighborBelief>& beliefs, std::span<const Vec3> sat_enu,
                    const FilterConfig& config, const FieldMetric& metric, Rng& rng);

double effective_sample_size(const ParticleCloud& cloud);

struct ResampleReport {
  bool resampled = false;
  bool reseeded = false;
  int distinct = 0;
};

/// Multinomial resampling when ESS < threshold; reseeds around the weighted
/// mean when too few distinct particles survive.
ResampleReport resample(ParticleCloud& cloud, const FilterConfig& config, Rng& rng);

struct PositionEstimate {
  Vec2 mean = Vec2::Zero();
  double variance = 0.0;
  Vec2 velocity = Vec2::Zero();
};

PositionEstimate estimate(const ParticleCloud& cloud);
NeighborBelief make_belief(const ParticleCloud& cloud);

double log_sum_exp(const Eigen::ArrayXd& v);

}  // namespace coopnlos
