#pragma once

#include <optional>
#include <string>

#include <Eigen/Core>

#include "coopnlos/common.hpp"

namespace coopnlos {

enum class ComponentKind { Gaussian, PositiveMeanGaussian, ExGaussian, Uniform };

std::string to_string(ComponentKind kind);
ComponentKind component_kind_from_string(const std::string& name);

/// One LOS or NLOS noise component. Ex-Gaussian is N(mean, sigma^2)
/// convolved with Exp(lambda); uniform lives on [lo, hi].
class ComponentDistribution {
 public:
  static ComponentDistribution gaussian(double mean, double sigma);
  static ComponentDistribution positive_mean_gaussian(double mean, double sigma);
  static ComponentDistribution ex_gaussian(double mean, double sigma, double lambda);
  static ComponentDistribution uniform(double lo, double hi);

  ComponentKind kind() const { return kind_; }
  double mean_param() const { return mean_; }
  double sigma() const { return sigma_; }
  double lambda() const { return lambda_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  double log_pdf(double n) const;
  double pdf(double n) const;
  /// d/dn pdf(n); zero inside a uniform's support.
  double pdf_derivative(double n) const;
  Eigen::ArrayXd log_pdf(const Eigen::ArrayXd& n) const;

  double mean() const;
  double variance() const;
  bool differentiable_with_vanishing_boundary() const { return kind_ != ComponentKind::Uniform; }

  /// The same component convolved with N(0, extra_variance) where that has a
  /// closed form (all Gaussian-core kinds). Uniform components are returned as-is.
  ComponentDistribution widened(double extra_variance) const;

  template <typename Urbg>
  double sample(Urbg& rng) const {
    switch (kind_) {
      case ComponentKind::Uniform:
        return std::uniform_real_distribution<double>(lo_, hi_)(rng);
      case ComponentKind::ExGaussian:
        return std::normal_distribution<double>(mean_, sigma_)(rng) +
               std::exponential_distribution<double>(lambda_)(rng);
      default:
        return sigma_ == 0.0 ? mean_ : std::normal_distribution<double>(mean_, sigma_)(rng);
    }
  }

 private:
  ComponentDistribution() = default;
  void validate() const;

  ComponentKind kind_ = ComponentKind::Gaussian;
  double mean_ = 0.0;
  double sigma_ = 1.0;
  double lambda_ = 1.0;
  double lo_ = 0.0;
  double hi_ = 1.0;
};

/// Noise n ~ alpha * p_LOS + (1 - alpha) * p_NLOS.
struct MixtureNoiseModel {
  double alpha = 1.0;
  ComponentDistribution los = ComponentDistribution::gaussian(0.0, 1.0);
  ComponentDistribution nlos = ComponentDistribution::positive_mean_gaussian(5.0, 5.0);

  void validate() const;
  MixtureNoiseModel with_alpha(double a) const;
  MixtureNoiseModel widened(double extra_variance) const;

  /// log p(n | z) when z is given (true = LOS), else log of the mixture density.
  double log_pdf(double n, std::optional<bool> z = std::nullopt) const;
  double pdf(double n) const;
  double pdf_derivative(double n) const;
  /// d/dn log p(n) of the mixture.
  double score(double n) const;

  template <typename Urbg>
  double sample(bool los_flag, Urbg& rng) const {
    return los_flag ? los.sample(rng) : nlos.sample(rng);
  }
};

/// Two-state LOS/NLOS Markov chain. States are indexed by the value of z
/// (0 = NLOS, 1 = LOS); transition(prev, next) = p(z_t = next | z_{t-1} = prev).
struct LosMarkov {
  Eigen::Matrix2d transition = Eigen::Matrix2d::Constant(0.5);
  double alpha = 0.5;

  double p_stay_los() const { return transition(1, 1); }
  double p_nlos_to_los() const { return transition(0, 1); }
  /// (1 - alpha, alpha), indexed by z.
  Eigen::Vector2d stationary() const { return {1.0 - alpha, alpha}; }

  template <typename Urbg>
  bool draw_initial(Urbg& rng) const {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < alpha;
  }
  template <typename Urbg>
  bool step(bool prev, Urbg& rng) const {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < transition(prev ? 1 : 0, 1);
  }
};

/// Builds the chain with the given stationary LOS probability and LOS
/// persistence; p(NLOS -> LOS) follows from stationarity.
LosMarkov make_markov(double alpha, double p_stay_los);

/// E[(d/dn ln p(n))^2] of the mixture by adaptive quadrature.
/// Throws NumericalError when a component has a non-vanishing boundary (uniform).
double compute_g(const MixtureNoiseModel& model);

/// dg/dalpha by central difference (one-sided at alpha = 0 or 1).
double g_sensitivity(const MixtureNoiseModel& model, double alpha, double delta = 1e-3);

/// Scaled complementary error function exp(x^2) erfc(x).
double erfcx(double x);

}  // namespace coopnlos
