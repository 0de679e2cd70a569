#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "coopnlos/crlb.hpp"
#include "coopnlos/filter.hpp"
#include "coopnlos/grid_oracle.hpp"
#include "coopnlos/scenario.hpp"

namespace coopnlos {

/// Filter knobs that live in the experiment config. Noise and chain
/// parameters come from the scenario so the estimator's model matches the simulator's.
struct FilterSettings {
  int particles = 2000;
  double ess_threshold = 30.0;
  int distinct_floor = 10;
  double reseed_spread_min = 1.0;
  double prior_spread = 5.0;  // m, std of the initial position prior per axis
  /// "truth": Gaussian around the true start perturbed by N(0, prior_spread^2).
  /// "road": uniform over the road surface, no knowledge of the start.
  std::string prior = "truth";

  FilterConfig make(const ScenarioConfig& scenario) const;
};

enum class SweepVariable { None, MaskAngle, SigmaR, Alpha, SigmaIns, Radius };
std::string to_string(SweepVariable v);
SweepVariable sweep_variable_from_string(const std::string& name);

struct ExperimentSpec {
  std::string name = "experiment";
  ScenarioConfig scenario;
  FilterSettings filter;
  SweepVariable sweep = SweepVariable::None;
  std::vector<double> values;  // sweep values; mask_angle in degrees, others in SI units
  int trials = 20;
  int warmup = 10;
  bool compute_crlb = true;
  bool compute_ls = true;
  bool write_beliefs = false;
  bool write_measurements = false;
  bool debug_truth = false;

  void validate() const;
  /// The swept values, or a single NaN placeholder for `SweepVariable::None`.
  std::vector<double> points() const;
};

/// Returns a copy of `base` with one sweep variable set.
ScenarioConfig apply_sweep(const ScenarioConfig& base, SweepVariable var, double value);

struct TrialResult {
  int trial = 0;
  double sweep_value = 0.0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;

  // [epoch, vehicle]
  Eigen::MatrixXd error;
  Eigen::MatrixXd ess;
  Eigen::MatrixXi resampled;
  Eigen::MatrixXi distinct;
  Eigen::MatrixXd x_hat, y_hat, variance;

  // Per epoch; NaN where unavailable or singular.
  std::vector<double> crlb_causal, crlb_full;
  std::vector<double> crlb_causal_min_eig, crlb_full_min_eig;
  std::vector<double> ls_error;  // mean over vehicles with a converged fix

  double mean_error = 0.0;  // post-warmup mean over epochs and vehicles
  double average_ess = 0.0;
  double ls_mean_error = 0.0;  // NaN when no fix was possible
  int ls_fixes = 0;
  bool diverged = false;
  std::optional<int> converged_epoch;

  int epochs() const { return static_cast<int>(error.rows()); }
  int vehicles() const { return static_cast<int>(error.cols()); }
  std::vector<double> epoch_mean_error() const;
  std::vector<double> epoch_mse() const;
};

struct SweepPointSummary {
  double value = 0.0;
  int trials = 0;
  int failed = 0;
  double mean_error = 0.0;
  double p05_error = 0.0;
  double p95_error = 0.0;
  double crlb_full_rms = 0.0;    // sqrt(mean trace / N) over post-warmup epochs
  double crlb_causal_rms = 0.0;
  double average_ess = 0.0;
  double divergence_rate = 0.0;
  double ls_mean_error = 0.0;
  double median_convergence = 0.0;  // NaN when no trial converged
};

struct RunResult {
  ExperimentSpec spec;
  std::vector<TrialResult> trials;
  std::vector<SweepPointSummary> summary;
};

/// Seed for one trial. Independent of the sweep point, so trial k sees the same
/// layout, INS and prior draws at every swept value (paired comparison).
std::uint64_t trial_seed(std::uint64_t base, int trial);

/// Scenario, synchronous filter schedule, bounds and least-squares baseline for one realization.
TrialResult run_trial(const ExperimentSpec& spec, const ScenarioConfig& scenario, int trial, double sweep_value);

/// All sweep points x trials; writes `out/{name}/{value}/trial_{k}.csv` and
/// `out/{name}/summary.csv` when `out` is set.
RunResult run_experiment(const ExperimentSpec& spec, const std::optional<std::filesystem::path>& out = std::nullopt);

SweepPointSummary summarize(const std::vector<const TrialResult*>& trials, double value, int warmup);

/// First epoch after which the forward rolling-5 mean error stays within 2x
/// the final-quarter mean. Empty for divergent runs.
std::optional<int> convergence_epoch(const std::vector<double>& epoch_error, bool diverged);

/// Mean error over the final quarter of post-warmup epochs exceeds 3x the
/// mean over the first quarter.
bool divergence_flag(const std::vector<double>& epoch_error, int warmup);

struct NeffRow {
  double sigma_r = 0.0;
  double average_ess = 0.0;
  int trials = 0;
};

/// Average ESS per ranging-noise level with everything else from `spec`.
std::vector<NeffRow> neff_table(const ExperimentSpec& spec, const std::vector<double>& sigmas);

struct ScalingRow {
  int added = 0;  // new anchors or new agents
  double predicted = 0.0;
  double empirical = 0.0;
  double rel_err = 0.0;
};

struct AnchorScalingParams {
  int agents = 5;
  int anchors = 3;
  double field = 100.0;  // torus side, m
  double radius = 40.0;
  std::vector<int> added = {0, 50, 200, 800};
  int deployments = 100;
  std::uint64_t seed = 1;
};

struct AgentScalingParams {
  int agents = 40;
  int anchors = 10;
  double field = 100.0;  // torus side, m
  double rho = 1.0;      // pi R^2 / area; links join nodes within R
  std::vector<int> added = {0, 200};
  int deployments = 5;
  std::uint64_t seed = 1;
  bool eigen_form = false;  // predict with the eigenvalue form instead of the full matrix
};

std::vector<ScalingRow> anchor_scaling_experiment(const AnchorScalingParams& params);
std::vector<ScalingRow> agent_scaling_experiment(const AgentScalingParams& params);

/// One-vehicle, three-anchor benchmark for the exact grid filter.
GridScenario make_toy_scenario(std::uint64_t seed, int epochs = 10);

struct OracleComparison {
  std::vector<Vec2> grid_mean;
  std::vector<Vec2> pf_mean;
  std::vector<double> gap;  // |pf - grid| per epoch
  double max_gap() const;
};

OracleComparison compare_with_grid(const GridScenario& toy, int particles, std::uint64_t seed);

// CSV writers.
void write_error_trace(const std::filesystem::path& path, const TrialResult& r);
void write_beliefs(const std::filesystem::path& path, const TrialResult& r);
void write_crlb(const std::filesystem::path& path, const TrialResult& r);
void write_measurements(const std::filesystem::path& path, const MeasurementSet& m, bool debug_truth);
void write_summary(const std::filesystem::path& path, const std::vector<SweepPointSummary>& rows);
void write_scaling(const std::filesystem::path& path, const std::vector<ScalingRow>& rows);
void write_neff(const std::filesystem::path& path, const std::vector<NeffRow>& rows);

/// Directory name for a sweep value ("none" for an unswept experiment).
std::string format_value(double v);

}  // namespace coopnlos
