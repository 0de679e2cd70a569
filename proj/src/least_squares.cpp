#include "coopnlos/least_squares.hpp"

#include <limits>

#include <Eigen/Dense>

namespace coopnlos {

LeastSquaresFix least_squares_fix(const std::vector<double>& ranges, const std::vector<Vec3>& sats,
                                  const Vec2& initial_guess, int max_iterations, double step_tol) {
  if (ranges.size() != sats.size()) throw ConfigError("least squares: ranges and satellites differ in count");
  if (sats.size() < 2) throw ConfigError("least squares: at least 2 satellites required for a 2D fix");

  const int n = static_cast<int>(sats.size());
  LeastSquaresFix fix;
  fix.position = initial_guess;
  double best_cost = std::numeric_limits<double>::infinity();
  Vec2 best = initial_guess;
  Eigen::MatrixX2d jac(n, 2);
  Eigen::VectorXd res(n);

  for (int it = 1; it <= max_iterations; ++it) {
    for (int s = 0; s < n; ++s) {
      const Vec3 d = Vec3(fix.position.x(), fix.position.y(), 0.0) - sats[s];
      const double r = d.norm();
      res(s) = ranges[s] - r;
      jac.row(s) = d.head<2>().transpose() / r;
    }
    const double cost = res.squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = fix.position;
    }
    const Vec2 step = jac.colPivHouseholderQr().solve(res);
    if (!step.allFinite()) break;
    fix.position += step;
    fix.iterations = it;
    if (step.norm() < step_tol) {
      fix.converged = true;
      return fix;
    }
  }
  fix.position = best;
  return fix;
}

}  // namespace coopnlos
