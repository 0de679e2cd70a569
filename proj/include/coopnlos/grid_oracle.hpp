#pragma once

#include <vector>

#include <Eigen/Core>

#include "coopnlos/common.hpp"
#include "coopnlos/noise.hpp"

namespace coopnlos {

/// A single unknown vehicle ranging to fixed planar anchors. Small enough to
/// solve exactly by brute force over (position cell x joint LOS state).
struct GridScenario {
  std::vector<Vec2> anchors;                 // at most 5
  std::vector<std::vector<double>> ranges;   // [epoch][anchor], at most 10 epochs
  std::vector<Vec2> displacement;            // known dead-reckoning step applied before epoch t >= 1
  double step_sigma = 0.1;                   // per-axis diffusion std per epoch, m
  Vec2 prior_mean = Vec2::Zero();
  double prior_spread = 1.0;
  MixtureNoiseModel noise;
  LosMarkov markov;
  Vec2 box_center = Vec2::Zero();  // grid centre at epoch 0; the grid follows `displacement`
  double box_size = 20.0;
  double pitch = 0.05;
};

struct GridPosterior {
  Vec2 origin = Vec2::Zero();   // centre of cell (0, 0)
  double pitch = 0.0;
  Eigen::ArrayXXd probability;  // (x index, y index), sums to 1
  Vec2 mean = Vec2::Zero();

  Vec2 cell_center(int ix, int iy) const { return origin + pitch * Vec2(ix, iy); }
};

inline constexpr int kGridMaxAnchors = 5;
inline constexpr int kGridMaxEpochs = 10;
inline constexpr int kGridMaxCellsPerAxis = 1000;

/// Exact forward recursion; one marginal position posterior per epoch.
std::vector<GridPosterior> grid_oracle_filter(const GridScenario& scenario);

}  // namespace coopnlos
