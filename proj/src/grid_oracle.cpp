#include "coopnlos/grid_oracle.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace coopnlos {
namespace {

// Separable convolution with a symmetric kernel, zero outside the box.
Eigen::ArrayXXd convolve(const Eigen::ArrayXXd& in, const Eigen::ArrayXd& kernel) {
  const int half = static_cast<int>(kernel.size() / 2);
  const int nx = static_cast<int>(in.rows()), ny = static_cast<int>(in.cols());
  Eigen::ArrayXXd tmp = Eigen::ArrayXXd::Zero(nx, ny);
  for (int j = 0; j < ny; ++j) {
    for (int o = -half; o <= half; ++o) {
      const int lo = std::max(0, -o), hi = std::min(nx, nx - o);
      if (hi > lo) tmp.col(j).segment(lo, hi - lo) += kernel(o + half) * in.col(j).segment(lo + o, hi - lo);
    }
  }
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(nx, ny);
  for (int o = -half; o <= half; ++o) {
    const int lo = std::max(0, -o), hi = std::min(ny, ny - o);
    if (hi > lo) out.middleCols(lo, hi - lo) += kernel(o + half) * tmp.middleCols(lo + o, hi - lo);
  }
  return out;
}

}  // namespace

std::vector<GridPosterior> grid_oracle_filter(const GridScenario& sc) {
  const int n_anchor = static_cast<int>(sc.anchors.size());
  const int n_epoch = static_cast<int>(sc.ranges.size());
  const int cells = static_cast<int>(std::lround(sc.box_size / sc.pitch));
  if (n_anchor > kGridMaxAnchors || n_epoch > kGridMaxEpochs || cells > kGridMaxCellsPerAxis) {
    throw ConfigError("grid oracle: scenario exceeds size cap (anchors <= 5, epochs <= 10, <= 1000 cells/axis)");
  }
  if (n_anchor == 0 || n_epoch == 0 || cells < 2) throw ConfigError("grid oracle: empty scenario");
  if (!(sc.pitch > 0.0) || !(sc.prior_spread > 0.0) || !(sc.step_sigma >= 0.0)) {
    throw ConfigError("grid oracle: pitch, prior spread must be positive");
  }
  for (const auto& r : sc.ranges) {
    if (static_cast<int>(r.size()) != n_anchor) throw ConfigError("grid oracle: one range per anchor per epoch");
  }

  const int states = 1 << n_anchor;
  Vec2 origin = sc.box_center - Vec2::Constant(0.5 * (cells - 1) * sc.pitch);
  auto centers = [&](int axis) {
    return Eigen::ArrayXd(Eigen::ArrayXd::LinSpaced(cells, 0, cells - 1) * sc.pitch + origin(axis));
  };

  // Joint LOS states: bit l of s is z for anchor l.
  std::vector<Eigen::ArrayXXd> belief(states);
  {
    const Eigen::ArrayXd xs = centers(0), ys = centers(1);
    const Eigen::ArrayXd gx = (-0.5 * ((xs - sc.prior_mean.x()) / sc.prior_spread).square()).exp();
    const Eigen::ArrayXd gy = (-0.5 * ((ys - sc.prior_mean.y()) / sc.prior_spread).square()).exp();
    const Eigen::ArrayXXd prior = gx.matrix() * gy.matrix().transpose();
    for (int s = 0; s < states; ++s) {
      double p = 1.0;
      for (int l = 0; l < n_anchor; ++l) p *= ((s >> l) & 1) ? sc.markov.alpha : 1.0 - sc.markov.alpha;
      belief[s] = prior * p;
    }
  }

  Eigen::ArrayXd kernel;
  if (sc.step_sigma > 0.0) {
    const int half = static_cast<int>(std::ceil(8.0 * sc.step_sigma / sc.pitch));
    kernel = Eigen::ArrayXd::LinSpaced(2 * half + 1, -half, half) * sc.pitch;
    kernel = (-0.5 * (kernel / sc.step_sigma).square()).exp();
    kernel /= kernel.sum();
  } else {
    kernel = Eigen::ArrayXd::Ones(1);
  }

  std::vector<GridPosterior> out;
  for (int t = 0; t < n_epoch; ++t) {
    if (t > 0) {
      // LOS chains, one link at a time.
      for (int l = 0; l < n_anchor; ++l) {
        const auto& p = sc.markov.transition;
        for (int s = 0; s < states; ++s) {
          if ((s >> l) & 1) continue;
          const int s1 = s | (1 << l);
          Eigen::ArrayXXd nlos = p(0, 0) * belief[s] + p(1, 0) * belief[s1];
          Eigen::ArrayXXd los = p(0, 1) * belief[s] + p(1, 1) * belief[s1];
          belief[s] = std::move(nlos);
          belief[s1] = std::move(los);
        }
      }
      // Position: known shift moves the grid, diffusion is a convolution.
      if (t < static_cast<int>(sc.displacement.size())) origin += sc.displacement[t];
      for (auto& b : belief) b = convolve(b, kernel);
    }

    const Eigen::ArrayXd xs = centers(0), ys = centers(1);
    std::vector<std::array<Eigen::ArrayXXd, 2>> lik(n_anchor);
    for (int l = 0; l < n_anchor; ++l) {
      const Eigen::ArrayXd dx2 = (xs - sc.anchors[l].x()).square();
      const Eigen::ArrayXd dy2 = (ys - sc.anchors[l].y()).square();
      Eigen::ArrayXXd dist(cells, cells);
      for (int j = 0; j < cells; ++j) dist.col(j) = (dx2 + dy2(j)).sqrt();
      const Eigen::ArrayXXd residual = sc.ranges[t][l] - dist;
      for (int z = 0; z < 2; ++z) {
        const auto& comp = z ? sc.noise.los : sc.noise.nlos;
        Eigen::ArrayXXd lp(cells, cells);
        for (int j = 0; j < cells; ++j) lp.col(j) = comp.log_pdf(Eigen::ArrayXd(residual.col(j)));
        lik[l][z] = lp;
      }
    }
    // Combine in the log domain, rescaled by the global max to avoid underflow.
    double log_max = -std::numeric_limits<double>::infinity();
    std::vector<Eigen::ArrayXXd> log_joint(states);
    for (int s = 0; s < states; ++s) {
      log_joint[s] = belief[s].log();
      for (int l = 0; l < n_anchor; ++l) log_joint[s] += lik[l][(s >> l) & 1];
      log_max = std::max(log_max, log_joint[s].maxCoeff());
    }
    double total = 0.0;
    for (int s = 0; s < states; ++s) {
      belief[s] = (log_joint[s] - log_max).exp();
      total += belief[s].sum();
    }
    if (!(total > 0.0)) throw NumericalError("grid oracle: posterior underflow");
    GridPosterior post;
    post.origin = origin;
    post.pitch = sc.pitch;
    post.probability = Eigen::ArrayXXd::Zero(cells, cells);
    for (auto& b : belief) {
      b /= total;
      post.probability += b;
    }
    const Eigen::ArrayXd mx = post.probability.rowwise().sum();
    const Eigen::ArrayXd my = post.probability.colwise().sum().transpose();
    post.mean = Vec2((mx * xs).sum(), (my * ys).sum());
    out.push_back(std::move(post));
  }
  return out;
}

}  // namespace coopnlos
