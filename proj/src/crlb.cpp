#include "coopnlos/crlb.hpp"

#include <cmath>

namespace coopnlos {
namespace {

void check_edge(const Network& net, int i, int j) {
  const int n = net.node_count();
  if (i < 0 || j < 0 || i >= n || j >= n || i == j) throw ConfigError("network edge references an invalid node pair");
}

Vec2 unit_direction(const Network& net, int i, int j) {
  const Vec2 d = net.metric.diff(net.node(i), net.node(j));
  const double r = d.norm();
  if (!(r > 0.0)) throw ConfigError("coincident endpoints on a ranging edge: bearing undefined");
  return d / r;
}

void symmetrize(Eigen::MatrixXd& m) { m = 0.5 * (m + m.transpose()).eval(); }

Eigen::MatrixXd epoch_information(const Network& net, double g_veh, double g_sat) {
  Eigen::MatrixXd G = g_veh * fisher_geometry_entrywise(net);
  if (!net.sat_edges.empty() && g_sat != 0.0) G += g_sat * fisher_satellite_geometry(net);
  return G;
}

}  // namespace

const Vec2& Network::node(int id) const {
  const int n = agent_count();
  return id < n ? agents[id] : anchors[id - n];
}

IncidenceSystem build_incidence(const Network& net) {
  const int n = net.agent_count();
  std::vector<std::pair<int, int>> rows;
  for (const auto& [i, j] : net.edges) {
    check_edge(net, i, j);
    if (i < n || j < n) rows.emplace_back(i, j);
  }
  IncidenceSystem sys;
  sys.agents = n;
  const int l = static_cast<int>(rows.size());
  sys.E = Eigen::MatrixXd::Zero(l, net.node_count());
  sys.y.resize(l);
  sys.dr.resize(l);
  sys.di.resize(l);
  for (int r = 0; r < l; ++r) {
    const auto [i, j] = rows[r];
    sys.E(r, i) = 1.0;
    sys.E(r, j) = -1.0;
    const Vec2 d = net.metric.diff(net.node(i), net.node(j));
    const double len = d.norm();
    if (!(len > 0.0)) throw ConfigError("coincident endpoints on a ranging edge: bearing undefined");
    sys.y(r) = {d.x(), d.y()};
    sys.dr(r) = d.x() / len;
    sys.di(r) = d.y() / len;
  }
  return sys;
}

Eigen::MatrixXd fisher_geometry_entrywise(const Network& net) {
  const int n = net.agent_count();
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (const auto& [i, j] : net.edges) {
    check_edge(net, i, j);
    if (i >= n && j >= n) continue;
    const Vec2 u = unit_direction(net, i, j);
    const double cc = u.x() * u.x(), ss = u.y() * u.y(), cs = u.x() * u.y();
    for (int k : {i, j}) {
      if (k >= n) continue;
      F(k, k) += cc;
      F(n + k, n + k) += ss;
      F(k, n + k) += cs;
      F(n + k, k) += cs;
    }
    if (i < n && j < n) {
      F(i, j) -= cc;
      F(j, i) -= cc;
      F(n + i, n + j) -= ss;
      F(n + j, n + i) -= ss;
      F(i, n + j) -= cs;
      F(j, n + i) -= cs;
      F(n + i, j) -= cs;
      F(n + j, i) -= cs;
    }
  }
  return F;
}

Eigen::MatrixXd fisher_geometry_incidence(const IncidenceSystem& sys) {
  const int n = sys.agents;
  const Eigen::MatrixXd E1 = sys.E1();
  const Eigen::VectorXd rr = sys.dr.array().square().matrix();
  const Eigen::VectorXd ii = sys.di.array().square().matrix();
  const Eigen::VectorXd ri = (sys.dr.array() * sys.di.array()).matrix();
  Eigen::MatrixXd F(2 * n, 2 * n);
  F.topLeftCorner(n, n) = E1.transpose() * rr.asDiagonal() * E1;
  F.bottomRightCorner(n, n) = E1.transpose() * ii.asDiagonal() * E1;
  F.topRightCorner(n, n) = E1.transpose() * ri.asDiagonal() * E1;
  F.bottomLeftCorner(n, n) = F.topRightCorner(n, n).transpose();
  return F;
}

Eigen::MatrixXd fisher_static(const Network& net, double g) {
  if (!(g > 0.0)) throw ConfigError("fisher_static: g must be positive");
  const Eigen::MatrixXd a = fisher_geometry_entrywise(net);
  const Eigen::MatrixXd b = fisher_geometry_incidence(build_incidence(net));
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - b).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw NumericalError("fisher_static: entrywise and incidence constructions disagree");
  }
  return g * a;
}

Eigen::MatrixXd fisher_satellite_geometry(const Network& net) {
  const int n = net.agent_count();
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (const auto& [k, s] : net.sat_edges) {
    if (k < 0 || k >= n || s < 0 || s >= static_cast<int>(net.satellites.size())) {
      throw ConfigError("satellite edge references an invalid agent or satellite");
    }
    const Vec3 d = Vec3(net.agents[k].x(), net.agents[k].y(), 0.0) - net.satellites[s];
    const double r = d.norm();
    if (!(r > 0.0)) throw ConfigError("satellite coincides with an agent");
    const Vec2 h = d.head<2>() / r;
    F(k, k) += h.x() * h.x();
    F(n + k, n + k) += h.y() * h.y();
    F(k, n + k) += h.x() * h.y();
    F(n + k, k) += h.x() * h.y();
  }
  return F;
}

Eigen::MatrixXd fisher_heterogeneous(const Network& net, double g_veh, double g_sat) {
  if (g_veh < 0.0 || g_sat < 0.0) throw ConfigError("fisher_heterogeneous: g values must be non-negative");
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(2 * net.agent_count(), 2 * net.agent_count());
  if (g_veh > 0.0) F += fisher_static(net, g_veh);
  if (g_sat > 0.0) F += g_sat * fisher_satellite_geometry(net);
  return F;
}

CrlbResult crlb_trace(const Eigen::MatrixXd& F) {
  CrlbResult out;
  if (F.rows() != F.cols() || F.rows() == 0) throw ConfigError("crlb_trace: matrix must be square and non-empty");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (F + F.transpose()));
  const Eigen::VectorXd& lam = es.eigenvalues();
  out.min_eig = lam.minCoeff();
  out.max_eig = lam.maxCoeff();
  const double floor = kSingularFloor * std::max(out.max_eig, 0.0);
  if (!(out.max_eig > 0.0) || out.min_eig < floor) {
    out.singular = true;
    out.trace = std::numeric_limits<double>::quiet_NaN();
    std::vector<int> idx;
    for (int i = 0; i < lam.size(); ++i)
      if (lam(i) < floor || !(out.max_eig > 0.0)) idx.push_back(i);
    out.null_space.resize(F.rows(), static_cast<int>(idx.size()));
    for (int c = 0; c < static_cast<int>(idx.size()); ++c) out.null_space.col(c) = es.eigenvectors().col(idx[c]);
    return out;
  }
  out.trace = lam.cwiseInverse().sum();
  const Eigen::MatrixXd& V = es.eigenvectors();
  out.diagonal = (V.array().square().matrix() * lam.cwiseInverse());
  return out;
}

double anchor_scaling_prediction(const ScalingInputs& in) {
  if (!(in.g > 0.0)) throw ConfigError("scaling: g must be positive");
  const double shift = 0.5 * in.rho * in.m_new;
  double sum = 0.0;
  for (double l : in.eigenvalues) {
    if (!(l + shift > 0.0)) throw NumericalError("scaling: eigenvalue plus anchor shift is not positive");
    sum += 1.0 / (l + shift);
  }
  return sum / in.g;
}

Eigen::MatrixXd agent_scaling_matrix(const Eigen::MatrixXd& F, const ScalingInputs& in) {
  const int n = in.n;
  if (F.rows() != 2 * n || F.cols() != 2 * n) throw ConfigError("agent scaling: F must be 2N x 2N");
  if (!(in.g > 0.0) || !(in.rho > 0.0) || n + in.m <= 0) throw ConfigError("agent scaling: invalid inputs");
  const double k = in.rho * (n + in.m);
  Eigen::MatrixXd corr = (1.0 - 1.0 / k) * Eigen::MatrixXd::Identity(2 * n, 2 * n);
  corr.topLeftCorner(n, n).array() -= 1.0 / k;
  corr.bottomRightCorner(n, n).array() -= 1.0 / k;
  return F + in.g * (0.5 * in.rho * in.n_new) * corr;
}

double agent_scaling_prediction(const ScalingInputs& in) {
  ScalingInputs shifted = in;
  shifted.m_new = in.n_new;
  return anchor_scaling_prediction(shifted);
}

Eigen::MatrixXd ins_chain(int agents, int epochs) {
  const int dim = 2 * agents * epochs;
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(dim, dim);
  const int block = 2 * agents;
  for (int t = 1; t < epochs; ++t) {
    for (int p = 0; p < block; ++p) {
      const int a = (t - 1) * block + p, b = t * block + p;
      C(a, a) += 1.0;
      C(b, b) += 1.0;
      C(a, b) -= 1.0;
      C(b, a) -= 1.0;
    }
  }
  return C;
}

Eigen::MatrixXd fisher_mobile(const std::vector<Network>& epochs, double g_veh, double g_sat, double sigma_ins,
                              double dt) {
  const int T = static_cast<int>(epochs.size());
  if (T < 1) throw ConfigError("fisher_mobile: need at least one epoch");
  const int n = epochs.front().agent_count();
  for (const auto& e : epochs)
    if (e.agent_count() != n) throw ConfigError("fisher_mobile: agent count changes across epochs");
  const int block = 2 * n;
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(block * T, block * T);
  for (int t = 0; t < T; ++t) F.block(t * block, t * block, block, block) = epoch_information(epochs[t], g_veh, g_sat);
  if (T > 1) {
    if (!(sigma_ins > 0.0) || !(dt > 0.0)) throw ConfigError("fisher_mobile: sigma_ins and dt must be positive");
    const double q = sigma_ins * dt;
    F += ins_chain(n, T) / (q * q);
  }
  return F;
}

CrlbResult causal_crlb_dense(const std::vector<Network>& epochs, double g_veh, double g_sat, double sigma_ins,
                             double dt, int t) {
  if (t < 0 || t >= static_cast<int>(epochs.size())) throw ConfigError("causal_crlb: epoch out of range");
  const std::vector<Network> head(epochs.begin(), epochs.begin() + t + 1);
  const Eigen::MatrixXd F = fisher_mobile(head, g_veh, g_sat, sigma_ins, dt);
  const int block = 2 * epochs.front().agent_count();
  const CrlbResult full = crlb_trace(F);
  if (full.singular) return full;
  // Marginal covariance of the last block is the trailing block of the inverse.
  const Eigen::MatrixXd cov = F.ldlt().solve(Eigen::MatrixXd::Identity(F.rows(), F.cols()));
  CrlbResult out = full;
  out.diagonal = cov.bottomRightCorner(block, block).diagonal();
  out.trace = out.diagonal.sum();
  return out;
}

CrlbSeries crlb_series(const std::vector<Network>& epochs, double g_veh, double g_sat, double sigma_ins, double dt) {
  const int T = static_cast<int>(epochs.size());
  CrlbSeries out;
  if (T == 0) return out;
  const int block = 2 * epochs.front().agent_count();
  for (const auto& e : epochs)
    if (2 * e.agent_count() != block) throw ConfigError("crlb_series: agent count changes across epochs");
  if (T > 1 && (!(sigma_ins > 0.0) || !(dt > 0.0))) throw ConfigError("crlb_series: sigma_ins and dt must be positive");
  const double c = T > 1 ? 1.0 / ((sigma_ins * dt) * (sigma_ins * dt)) : 0.0;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(block, block);

  std::vector<Eigen::MatrixXd> G(T), fwd(T), bwd(T);
  for (int t = 0; t < T; ++t) G[t] = epoch_information(epochs[t], g_veh, g_sat);

  fwd[0] = G[0];
  for (int t = 1; t < T; ++t) {
    const Eigen::MatrixXd P = fwd[t - 1] + c * I;
    fwd[t] = G[t] + c * I - c * c * P.ldlt().solve(I);
    symmetrize(fwd[t]);
  }
  bwd[T - 1] = Eigen::MatrixXd::Zero(block, block);
  for (int t = T - 2; t >= 0; --t) {
    const Eigen::MatrixXd P = G[t + 1] + bwd[t + 1] + c * I;
    bwd[t] = c * I - c * c * P.ldlt().solve(I);
    symmetrize(bwd[t]);
  }
  for (int t = 0; t < T; ++t) {
    out.causal.push_back(crlb_trace(fwd[t]));
    out.smoothed.push_back(crlb_trace(fwd[t] + bwd[t]));
  }
  return out;
}

LlnReport lln_angle_check(int m_tilde, Rng& rng) {
  if (m_tilde < 1) throw ConfigError("lln_angle_check: need at least one sample");
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  LlnReport r;
  r.samples = m_tilde;
  for (int i = 0; i < m_tilde; ++i) {
    const double a = angle(rng), b = angle(rng);
    const double ca = std::cos(a), sa = std::sin(a), cb = std::cos(b);
    const double c2 = ca * ca;
    r.cos2 += c2;
    r.sin2 += sa * sa;
    r.cross += ca * sa;
    r.fourth_same += c2 * c2;
    r.fourth_cross += c2 * cb * cb;
  }
  const double m = m_tilde;
  r.cos2 /= m;
  r.sin2 /= m;
  r.cross /= m;
  r.fourth_same /= m;
  r.fourth_cross /= m;
  // Var cos^2 = Var sin^2 = Var(cos sin) = 1/8; Var cos^4 = 35/128 - 9/64; Var(cos^2 a cos^2 b) = 9/64 - 1/16.
  r.se_cos2 = std::sqrt(0.125 / m);
  r.se_sin2 = r.se_cos2;
  r.se_cross = r.se_cos2;
  r.se_fourth_same = std::sqrt((35.0 / 128.0 - 9.0 / 64.0) / m);
  r.se_fourth_cross = std::sqrt((9.0 / 64.0 - 1.0 / 16.0) / m);
  return r;
}

}  // namespace coopnlos
