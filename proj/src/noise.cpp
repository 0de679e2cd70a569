#include "coopnlos/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace coopnlos {
namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_gauss(double n, double mean, double sigma) {
  const double u = (n - mean) / sigma;
  return -0.5 * u * u - std::log(sigma) - kLogSqrt2Pi;
}

double log_ex_gauss(double n, double mean, double sigma, double lambda) {
  const double z = (mean + lambda * sigma * sigma - n) / (std::sqrt(2.0) * sigma);
  const double lead = std::log(0.5 * lambda) + 0.5 * lambda * (2.0 * mean + lambda * sigma * sigma - 2.0 * n);
  if (z > 0.0) return lead - z * z + std::log(erfcx(z));
  return lead + std::log(std::erfc(z));
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

double erfcx(double x) {
  if (x < 25.0) return std::exp(x * x) * std::erfc(x);
  // Asymptotic expansion; relative error below 1e-12 for x >= 25.
  const double inv2 = 1.0 / (x * x);
  const double series = 1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2;
  return series / (x * std::sqrt(kPi));
}

std::string to_string(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::Gaussian: return "gaussian";
    case ComponentKind::PositiveMeanGaussian: return "positive-mean-gaussian";
    case ComponentKind::ExGaussian: return "ex-gaussian";
    case ComponentKind::Uniform: return "uniform";
  }
  return "unknown";
}

ComponentKind component_kind_from_string(const std::string& name) {
  if (name == "gaussian") return ComponentKind::Gaussian;
  if (name == "positive-mean-gaussian" || name == "positive_mean_gaussian") return ComponentKind::PositiveMeanGaussian;
  if (name == "ex-gaussian" || name == "ex_gaussian") return ComponentKind::ExGaussian;
  if (name == "uniform") return ComponentKind::Uniform;
  throw ConfigError("unknown noise component kind '" + name + "'");
}

ComponentDistribution ComponentDistribution::gaussian(double mean, double sigma) {
  ComponentDistribution d;
  d.kind_ = ComponentKind::Gaussian;
  d.mean_ = mean;
  d.sigma_ = sigma;
  d.validate();
  return d;
}

ComponentDistribution ComponentDistribution::positive_mean_gaussian(double mean, double sigma) {
  ComponentDistribution d = gaussian(mean, sigma);
  d.kind_ = ComponentKind::PositiveMeanGaussian;
  d.validate();
  return d;
}

ComponentDistribution ComponentDistribution::ex_gaussian(double mean, double sigma, double lambda) {
  ComponentDistribution d;
  d.kind_ = ComponentKind::ExGaussian;
  d.mean_ = mean;
  d.sigma_ = sigma;
  d.lambda_ = lambda;
  d.validate();
  return d;
}

ComponentDistribution ComponentDistribution::uniform(double lo, double hi) {
  ComponentDistribution d;
  d.kind_ = ComponentKind::Uniform;
  d.lo_ = lo;
  d.hi_ = hi;
  d.validate();
  return d;
}

void ComponentDistribution::validate() const {
  switch (kind_) {
    case ComponentKind::Uniform:
      if (!(hi_ > lo_)) throw ConfigError("uniform component needs hi > lo");
      return;
    case ComponentKind::ExGaussian:
      if (!(lambda_ > 0.0)) throw ConfigError("ex-gaussian component needs lambda > 0");
      [[fallthrough]];
    case ComponentKind::Gaussian:
      if (!(sigma_ > 0.0) || !std::isfinite(sigma_)) throw ConfigError("noise component needs sigma > 0");
      if (!std::isfinite(mean_)) throw ConfigError("noise component mean must be finite");
      return;
    case ComponentKind::PositiveMeanGaussian:
      if (!(sigma_ > 0.0)) throw ConfigError("noise component needs sigma > 0");
      if (!(mean_ > 0.0)) throw ConfigError("positive-mean-gaussian needs mean > 0");
      return;
  }
}

double ComponentDistribution::log_pdf(double n) const {
  switch (kind_) {
    case ComponentKind::Uniform:
      return (n >= lo_ && n <= hi_) ? -std::log(hi_ - lo_) : kNegInf;
    case ComponentKind::ExGaussian:
      return log_ex_gauss(n, mean_, sigma_, lambda_);
    default:
      return log_gauss(n, mean_, sigma_);
  }
}

double ComponentDistribution::pdf(double n) const { return std::exp(log_pdf(n)); }

double ComponentDistribution::pdf_derivative(double n) const {
  switch (kind_) {
    case ComponentKind::Uniform:
      return 0.0;
    case ComponentKind::ExGaussian:
      // (G * Exp)' = lambda * (G - G * Exp)
      return lambda_ * (std::exp(log_gauss(n, mean_, sigma_)) - pdf(n));
    default:
      return -(n - mean_) / (sigma_ * sigma_) * pdf(n);
  }
}

Eigen::ArrayXd ComponentDistribution::log_pdf(const Eigen::ArrayXd& n) const {
  switch (kind_) {
    case ComponentKind::Gaussian:
    case ComponentKind::PositiveMeanGaussian: {
      const double c = -std::log(sigma_) - kLogSqrt2Pi;
      const double inv = 1.0 / sigma_;
      return c - 0.5 * ((n - mean_) * inv).square();
    }
    default:
      return n.unaryExpr([this](double v) { return log_pdf(v); });
  }
}

double ComponentDistribution::mean() const {
  switch (kind_) {
    case ComponentKind::Uniform: return 0.5 * (lo_ + hi_);
    case ComponentKind::ExGaussian: return mean_ + 1.0 / lambda_;
    default: return mean_;
  }
}

double ComponentDistribution::variance() const {
  switch (kind_) {
    case ComponentKind::Uniform: return (hi_ - lo_) * (hi_ - lo_) / 12.0;
    case ComponentKind::ExGaussian: return sigma_ * sigma_ + 1.0 / (lambda_ * lambda_);
    default: return sigma_ * sigma_;
  }
}

ComponentDistribution ComponentDistribution::widened(double extra_variance) const {
  if (extra_variance < 0.0) throw ConfigError("negative extra variance");
  ComponentDistribution d = *this;
  if (kind_ != ComponentKind::Uniform) d.sigma_ = std::sqrt(sigma_ * sigma_ + extra_variance);
  return d;
}

void MixtureNoiseModel::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("mixture alpha must lie in [0, 1]");
}

MixtureNoiseModel MixtureNoiseModel::with_alpha(double a) const {
  MixtureNoiseModel m = *this;
  m.alpha = a;
  m.validate();
  return m;
}

MixtureNoiseModel MixtureNoiseModel::widened(double extra_variance) const {
  MixtureNoiseModel m = *this;
  m.los = los.widened(extra_variance);
  m.nlos = nlos.widened(extra_variance);
  return m;
}

double MixtureNoiseModel::log_pdf(double n, std::optional<bool> z) const {
  if (z) return *z ? los.log_pdf(n) : nlos.log_pdf(n);
  const double a = alpha > 0.0 ? std::log(alpha) + los.log_pdf(n) : kNegInf;
  const double b = alpha < 1.0 ? std::log1p(-alpha) + nlos.log_pdf(n) : kNegInf;
  return log_add(a, b);
}

double MixtureNoiseModel::pdf(double n) const { return std::exp(log_pdf(n)); }

double MixtureNoiseModel::pdf_derivative(double n) const {
  return alpha * los.pdf_derivative(n) + (1.0 - alpha) * nlos.pdf_derivative(n);
}

double MixtureNoiseModel::score(double n) const {
  // p'/p = sum_c w_c * (p_c'/p_c) with posterior component weights w_c,
  // evaluated in the log domain so tails do not underflow to 0/0.
  const double total = log_pdf(n);
  if (total == kNegInf) return 0.0;
  auto component_score = [n](const ComponentDistribution& c) {
    switch (c.kind()) {
      case ComponentKind::Uniform:
        return 0.0;
      case ComponentKind::ExGaussian:
        return c.lambda() * (std::exp(log_gauss(n, c.mean_param(), c.sigma()) - c.log_pdf(n)) - 1.0);
      default:
        return -(n - c.mean_param()) / (c.sigma() * c.sigma());
    }
  };
  double s = 0.0;
  if (alpha > 0.0) {
    const double lw = std::log(alpha) + los.log_pdf(n) - total;
    if (lw > kNegInf) s += std::exp(lw) * component_score(los);
  }
  if (alpha < 1.0) {
    const double lw = std::log1p(-alpha) + nlos.log_pdf(n) - total;
    if (lw > kNegInf) s += std::exp(lw) * component_score(nlos);
  }
  return s;
}

LosMarkov make_markov(double alpha, double p_stay_los) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("markov: alpha must lie in [0, 1]");
  if (!(p_stay_los >= 0.0 && p_stay_los <= 1.0)) throw ConfigError("markov: p_stay_los must lie in [0, 1]");
  double p_nl;
  if (alpha == 1.0) {
    if (p_stay_los != 1.0) throw ConfigError("markov: alpha = 1 requires p_stay_los = 1");
    p_nl = 1.0;
  } else {
    p_nl = alpha * (1.0 - p_stay_los) / (1.0 - alpha);
  }
  if (p_nl > 1.0 + 1e-15) {
    throw ConfigError("markov: infeasible (alpha, p_stay_los); p(NLOS->LOS) = " + std::to_string(p_nl));
  }
  p_nl = std::min(p_nl, 1.0);
  LosMarkov m;
  m.alpha = alpha;
  m.transition << 1.0 - p_nl, p_nl, 1.0 - p_stay_los, p_stay_los;
  return m;
}

namespace {

// Range outside which the mixture density is below 1e-30.
std::pair<double, double> truncated_support(const MixtureNoiseModel& m) {
  const double log_floor = std::log(1e-30);
  std::vector<const ComponentDistribution*> active;
  if (m.alpha > 0.0) active.push_back(&m.los);
  if (m.alpha < 1.0) active.push_back(&m.nlos);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double scale = 0.0;
  for (const auto* c : active) {
    const double s = std::sqrt(c->variance());
    lo = std::min(lo, c->mean() - 5.0 * s);
    hi = std::max(hi, c->mean() + 5.0 * s);
    scale = std::max(scale, s);
  }
  const double step = 0.5 * scale;
  while (m.log_pdf(lo) > log_floor) lo -= step;
  while (m.log_pdf(hi) > log_floor) hi += step;
  return {lo, hi};
}

double integrate_g(const MixtureNoiseModel& m, double lo, double hi) {
  using boost::math::quadrature::gauss_kronrod;
  auto integrand = [&m](double n) {
    const double lp = m.log_pdf(n);
    if (lp == kNegInf) return 0.0;
    const double s = m.score(n);
    return std::exp(lp) * s * s;
  };
  std::vector<double> breaks{lo, hi};
  auto add_break = [&](double x) {
    if (x > lo && x < hi) breaks.push_back(x);
  };
  for (const auto* c : {&m.los, &m.nlos}) {
    const double s = std::sqrt(c->variance());
    add_break(c->mean());
    add_break(c->mean() - 3.0 * s);
    add_break(c->mean() + 3.0 * s);
    add_break(c->mean_param());
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    double err = 0.0;
    total += gauss_kronrod<double, 61>::integrate(integrand, breaks[i], breaks[i + 1], 20, 1e-11, &err);
  }
  return total;
}

}  // namespace

double compute_g(const MixtureNoiseModel& model) {
  model.validate();
  const bool uses_los = model.alpha > 0.0;
  const bool uses_nlos = model.alpha < 1.0;
  if ((uses_los && !model.los.differentiable_with_vanishing_boundary()) ||
      (uses_nlos && !model.nlos.differentiable_with_vanishing_boundary())) {
    throw NumericalError(
        "compute_g: assumption violated; noise density must be differentiable with a vanishing "
        "boundary (uniform components are not)");
  }
  auto [lo, hi] = truncated_support(model);
  double g = integrate_g(model, lo, hi);
  for (int widen = 0; widen < 8; ++widen) {
    const double pad = 0.25 * (hi - lo);
    lo -= pad;
    hi += pad;
    const double wider = integrate_g(model, lo, hi);
    const bool settled = std::abs(wider - g) <= 1e-8 * std::abs(wider);
    g = wider;
    if (settled) break;
  }
  return g;
}

double g_sensitivity(const MixtureNoiseModel& model, double alpha, double delta) {
  if (!(delta > 0.0)) throw ConfigError("g_sensitivity: delta must be positive");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("g_sensitivity: alpha must lie in [0, 1]");
  if (alpha - delta < 0.0) {
    return (compute_g(model.with_alpha(alpha + delta)) - compute_g(model.with_alpha(alpha))) / delta;
  }
  if (alpha + delta > 1.0) {
    return (compute_g(model.with_alpha(alpha)) - compute_g(model.with_alpha(alpha - delta))) / delta;
  }
  return (compute_g(model.with_alpha(alpha + delta)) - compute_g(model.with_alpha(alpha - delta))) /
         (2.0 * delta);
}

}  // namespace coopnlos
