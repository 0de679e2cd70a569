#pragma once

#include <vector>

#include "coopnlos/common.hpp"

namespace coopnlos {

struct LeastSquaresFix {
  Vec2 position = Vec2::Zero();
  bool converged = false;
  int iterations = 0;
};

/// 2D Gauss-Newton fix from satellite ranges; the receiver sits at altitude 0
/// and there is no clock bias.
LeastSquaresFix least_squares_fix(const std::vector<double>& ranges, const std::vector<Vec3>& sats,
                                  const Vec2& initial_guess, int max_iterations = 50, double step_tol = 1e-6);

}  // namespace coopnlos
