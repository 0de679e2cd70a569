#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "coopnlos/common.hpp"
#include "coopnlos/geometry.hpp"

namespace coopnlos {

/// Snapshot of a ranging network. Node ids: agents are [0, N), planar anchors
/// are [N, N + M). Satellites are ENU points linked to agents by `sat_edges`.
///
/// Static parameter ordering is [x_0..x_{N-1}; y_0..y_{N-1}].
struct Network {
  std::vector<Vec2> agents;
  std::vector<Vec2> anchors;
  std::vector<std::pair<int, int>> edges;
  std::vector<Vec3> satellites;
  std::vector<std::pair<int, int>> sat_edges;  // (agent, satellite)
  FieldMetric metric;

  int agent_count() const { return static_cast<int>(agents.size()); }
  int node_count() const { return static_cast<int>(agents.size() + anchors.size()); }
  const Vec2& node(int id) const;
};

/// Edge-node incidence form E x = y of the agent-involving edges.
struct IncidenceSystem {
  Eigen::MatrixXd E;            // L x (N + M), one +1 and one -1 per row
  int agents = 0;
  Eigen::VectorXcd y;           // x_i - x_j as complex numbers
  Eigen::VectorXd dr, di;       // Re, Im of y / |y|

  Eigen::MatrixXd E1() const { return E.leftCols(agents); }
  Eigen::MatrixXd E2() const { return E.rightCols(E.cols() - agents); }
};

IncidenceSystem build_incidence(const Network& net);

/// Geometry-only matrix F_G from the per-entry trigonometric sums.
Eigen::MatrixXd fisher_geometry_entrywise(const Network& net);
/// The same matrix from the incidence form.
Eigen::MatrixXd fisher_geometry_incidence(const IncidenceSystem& sys);

/// g * F_G over `net.edges`, built both ways; throws NumericalError if the
/// two constructions disagree beyond 1e-10 relative.
Eigen::MatrixXd fisher_static(const Network& net, double g);

/// Satellite part of F_G: each link adds h h^T with h the horizontal part of
/// the unit line-of-sight vector (|h| = cos(elevation)).
Eigen::MatrixXd fisher_satellite_geometry(const Network& net);

/// g_veh * F_G^veh + g_sat * F_G^sat.
Eigen::MatrixXd fisher_heterogeneous(const Network& net, double g_veh, double g_sat);

struct CrlbResult {
  bool singular = false;
  double trace = 0.0;  // sum of CRLB variances, m^2; NaN when singular
  double min_eig = 0.0;
  double max_eig = 0.0;
  Eigen::VectorXd diagonal;    // diag(F^-1), empty when singular
  Eigen::MatrixXd null_space;  // eigenvectors below the floor, when singular
};

inline constexpr double kSingularFloor = 1e-8;

CrlbResult crlb_trace(const Eigen::MatrixXd& F);

/// A - B D^-1 B^T for M = [[A, B], [B^T, D]] with D the trailing block.
template <typename Derived>
Eigen::MatrixXd schur_complement(const Eigen::MatrixBase<Derived>& M, int trailing) {
  const int n = static_cast<int>(M.rows());
  if (M.cols() != n || trailing < 0 || trailing > n) throw ConfigError("schur complement: bad block size");
  const int lead = n - trailing;
  if (trailing == 0) return M;
  const Eigen::MatrixXd D = M.bottomRightCorner(trailing, trailing);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().cwiseAbs().minCoeff();
  const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(lo > 1e-12 * hi)) {
    throw NumericalError("schur complement: trailing block singular (condition number " +
                         std::to_string(lo > 0 ? hi / lo : std::numeric_limits<double>::infinity()) + ")");
  }
  const Eigen::MatrixXd B = M.topRightCorner(lead, trailing);
  return M.topLeftCorner(lead, lead) - B * D.ldlt().solve(B.transpose());
}

struct ScalingInputs {
  Eigen::VectorXd eigenvalues;  // of F_G
  double rho = 1.0;             // pi R^2 / area
  int n = 0;                    // existing agents
  int m = 0;                    // existing anchors
  int n_new = 0;
  int m_new = 0;
  double g = 1.0;
};

/// (1/g) sum 1 / (lambda_i + rho M~ / 2).
double anchor_scaling_prediction(const ScalingInputs& in);

/// Large-N~ limit of the Fisher matrix after adding N~ agents that range only
/// to existing nodes. `F` is the current g * F_G.
Eigen::MatrixXd agent_scaling_matrix(const Eigen::MatrixXd& F, const ScalingInputs& in);

/// (1/g) sum 1 / (lambda_i + rho N~ / 2): the large-N form of the trace of the
/// inverse of `agent_scaling_matrix`.
double agent_scaling_prediction(const ScalingInputs& in);

/// Time-stacked Fisher over T epochs of the same N agents. Ordering is
/// [x(1); y(1); ...; x(T); y(T)], each block of length N. Dead-reckoning
/// links contribute a chain per agent and axis with precision 1 / (sigma_ins dt)^2.
Eigen::MatrixXd fisher_mobile(const std::vector<Network>& epochs, double g_veh, double g_sat, double sigma_ins,
                              double dt);

/// The dead-reckoning chain alone: second-difference matrix with 1 at both
/// ends of the diagonal, 2 inside, -1 off-diagonal (unscaled).
Eigen::MatrixXd ins_chain(int agents, int epochs);

/// Causal bound for epoch t (0-based) from the dense time-stacked matrix.
CrlbResult causal_crlb_dense(const std::vector<Network>& epochs, double g_veh, double g_sat, double sigma_ins,
                             double dt, int t);

struct CrlbSeries {
  std::vector<CrlbResult> causal;    // information from epochs <= t
  std::vector<CrlbResult> smoothed;  // information from all epochs
};

/// Both bounds for every epoch using forward and backward information
/// recursions on the chain; cost is linear in T.
CrlbSeries crlb_series(const std::vector<Network>& epochs, double g_veh, double g_sat, double sigma_ins, double dt);

struct LlnReport {
  int samples = 0;
  double cos2 = 0.0, sin2 = 0.0, cross = 0.0;          // means of cos^2, sin^2, cos*sin
  double fourth_same = 0.0, fourth_cross = 0.0;        // cos^4(a), cos^2(a) cos^2(b)
  double se_cos2 = 0.0, se_sin2 = 0.0, se_cross = 0.0;  // analytic standard errors
  double se_fourth_same = 0.0, se_fourth_cross = 0.0;

  // Deviation from the limit in units of the standard error.
  double z_cos2() const { return (cos2 - 0.5) / se_cos2; }
  double z_sin2() const { return (sin2 - 0.5) / se_sin2; }
  double z_cross() const { return cross / se_cross; }
  double z_fourth_same() const { return (fourth_same - 0.375) / se_fourth_same; }
  double z_fourth_cross() const { return (fourth_cross - 0.25) / se_fourth_cross; }
};

/// Sample averages of angle statistics for i.i.d. uniform bearings.
LlnReport lln_angle_check(int m_tilde, Rng& rng);

}  // namespace coopnlos
