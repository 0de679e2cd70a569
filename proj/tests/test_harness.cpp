#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "coopnlos/config.hpp"
#include "coopnlos/harness.hpp"

using namespace coopnlos;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("coopnlos_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int line_count(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

ExperimentSpec tiny_spec() {
  ExperimentSpec spec;
  spec.name = "tiny";
  spec.scenario.lane_count = 2;
  spec.scenario.vehicles_per_lane = 3;
  spec.scenario.epochs = 12;
  spec.filter.particles = 300;
  spec.trials = 1;
  spec.warmup = 2;
  return spec;
}

}  // namespace

TEST(Config, DefaultsWhenEmpty) {
  const ExperimentSpec spec = parse_experiment("{}");
  const ExperimentSpec def;
  EXPECT_EQ(spec.scenario.lane_count, def.scenario.lane_count);
  EXPECT_DOUBLE_EQ(spec.scenario.mean_speed, 30.0 * kMph);
  EXPECT_DOUBLE_EQ(spec.scenario.mask_angle_min, 55.0 * kDeg);
  EXPECT_EQ(spec.filter.particles, 2000);
  EXPECT_DOUBLE_EQ(spec.filter.ess_threshold, 30.0);
}

TEST(Config, UnitsConvertedAtBoundary) {
  const ExperimentSpec spec = parse_experiment(R"({
    "mean_speed_mph": 60, "mask_angle_min_deg": 10, "mask_angle_max_deg": 20,
    "latitude_deg": 45, "noise": {"alpha": 0.25, "p_stay_los": 0.9}
  })");
  EXPECT_NEAR(spec.scenario.mean_speed, 26.8224, 1e-9);
  EXPECT_NEAR(spec.scenario.mask_angle_min, 10.0 * M_PI / 180.0, 1e-15);
  EXPECT_NEAR(spec.scenario.mask_angle_max, 20.0 * M_PI / 180.0, 1e-15);
  EXPECT_NEAR(spec.scenario.latitude, M_PI / 4.0, 1e-15);
  EXPECT_DOUBLE_EQ(spec.scenario.noise.alpha, 0.25);
  EXPECT_DOUBLE_EQ(spec.scenario.sat_noise.alpha, 0.25);
  ASSERT_TRUE(spec.scenario.p_stay_los.has_value());
  EXPECT_DOUBLE_EQ(*spec.scenario.p_stay_los, 0.9);
}

TEST(Config, NoiseComponents) {
  const ExperimentSpec spec = parse_experiment(R"({
    "noise": {"alpha": 0.7, "nlos": {"kind": "ex-gaussian", "mean": 1, "sigma": 2, "lambda": 0.5}},
    "sat_noise": {"alpha": 0.9, "los": {"sigma": 3}}
  })");
  EXPECT_EQ(spec.scenario.noise.nlos.kind(), ComponentKind::ExGaussian);
  EXPECT_DOUBLE_EQ(spec.scenario.noise.nlos.lambda(), 0.5);
  EXPECT_DOUBLE_EQ(spec.scenario.sat_noise.alpha, 0.9);
  EXPECT_DOUBLE_EQ(spec.scenario.sat_noise.los.sigma(), 3.0);
}

TEST(Config, ExperimentSection) {
  const ExperimentSpec spec = parse_experiment(R"({
    "experiment": {"name": "a", "sweep": "alpha", "values": [0.25, 1.0], "trials": 3, "crlb": false}
  })");
  EXPECT_EQ(spec.name, "a");
  EXPECT_EQ(spec.sweep, SweepVariable::Alpha);
  EXPECT_EQ(spec.values.size(), 2u);
  EXPECT_EQ(spec.trials, 3);
  EXPECT_FALSE(spec.compute_crlb);
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_experiment(R"({"lane_cnt": 4})"), ConfigError);
  EXPECT_THROW(parse_experiment(R"({"filter": {"particle": 10}})"), ConfigError);
  EXPECT_THROW(parse_experiment(R"({"noise": {"los": {"shape": 1}}})"), ConfigError);
  EXPECT_THROW(parse_experiment(R"({"mean_speed": 10, "mean_speed_mph": 20})"), ConfigError);
  EXPECT_THROW(parse_experiment(R"({"epochs": "many"})"), ConfigError);
  EXPECT_THROW(parse_experiment("{not json"), ConfigError);
  EXPECT_THROW(parse_experiment(R"({"noise": {"alpha": 1.5}})"), ConfigError);
  EXPECT_THROW(parse_experiment(R"({"experiment": {"sweep": "speed"}})"), ConfigError);
  EXPECT_THROW(parse_experiment(R"({"sat_noise": {"p_stay_los": 0.5}})"), ConfigError);
}

TEST(Config, SweepNamesRoundTrip) {
  for (auto v : {SweepVariable::None, SweepVariable::MaskAngle, SweepVariable::SigmaR, SweepVariable::Alpha,
                 SweepVariable::SigmaIns, SweepVariable::Radius}) {
    EXPECT_EQ(sweep_variable_from_string(to_string(v)), v);
  }
}

TEST(Experiment, ApplySweep) {
  const ScenarioConfig base;
  EXPECT_DOUBLE_EQ(apply_sweep(base, SweepVariable::MaskAngle, 30).mask_angle_min, 30 * kDeg);
  EXPECT_DOUBLE_EQ(apply_sweep(base, SweepVariable::MaskAngle, 30).mask_angle_max, 30 * kDeg);
  EXPECT_DOUBLE_EQ(apply_sweep(base, SweepVariable::SigmaR, 3).noise.los.sigma(), 3.0);
  EXPECT_DOUBLE_EQ(apply_sweep(base, SweepVariable::Alpha, 0.25).noise.alpha, 0.25);
  EXPECT_DOUBLE_EQ(apply_sweep(base, SweepVariable::SigmaIns, 10).sigma_ins, 10.0);
  EXPECT_DOUBLE_EQ(apply_sweep(base, SweepVariable::Radius, 20).comm_radius, 20.0);
}

TEST(Experiment, RejectsUnsupportedModality) {
  ExperimentSpec spec = tiny_spec();
  spec.scenario.modality = Modality::Rss;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Experiment, TrialSeedsDistinct) {
  EXPECT_NE(trial_seed(1, 0), trial_seed(1, 1));
  EXPECT_NE(trial_seed(1, 0), trial_seed(2, 0));
  EXPECT_EQ(trial_seed(7, 4), trial_seed(7, 4));
}

TEST(Experiment, CsvLayout) {
  const fs::path dir = scratch("layout");
  ExperimentSpec spec = tiny_spec();
  spec.write_beliefs = true;
  spec.write_measurements = true;
  const RunResult r = run_experiment(spec, dir);
  const int T = spec.scenario.epochs, N = spec.scenario.vehicle_count();
  const fs::path point = dir / "tiny" / "none";
  ASSERT_TRUE(fs::exists(point / "trial_0.csv"));
  EXPECT_EQ(line_count(point / "trial_0.csv"), 1 + T * N);
  EXPECT_EQ(line_count(point / "trial_0_beliefs.csv"), 1 + T * N);
  EXPECT_GE(line_count(point / "trial_0_crlb.csv"), 1 + T);
  EXPECT_TRUE(fs::exists(point / "trial_0_measurements.csv"));
  ASSERT_TRUE(fs::exists(dir / "tiny" / "summary.csv"));
  EXPECT_EQ(line_count(dir / "tiny" / "summary.csv"), 2);
  std::ifstream in(dir / "tiny" / "summary.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header,
            "sweep_value,trials,failed,mean_err_m,p05_err_m,p95_err_m,crlb_full_m,crlb_causal_m,avg_ess,"
            "divergence_rate,ls_mean_err_m,median_convergence_epoch");
  ASSERT_EQ(r.trials.size(), 1u);
  EXPECT_EQ(r.trials[0].epochs(), T);
  EXPECT_EQ(r.trials[0].vehicles(), N);
  EXPECT_TRUE(r.trials[0].error.allFinite());
}

TEST(Experiment, ByteIdenticalReruns) {
  const fs::path a = scratch("repro_a"), b = scratch("repro_b");
  ExperimentSpec spec = tiny_spec();
  spec.trials = 2;
  spec.write_measurements = true;
  run_experiment(spec, a);
  run_experiment(spec, b);
  int compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path other = b / fs::relative(entry.path(), a);
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(slurp(entry.path()), slurp(other)) << entry.path();
    ++compared;
  }
  EXPECT_GE(compared, 5);
}

TEST(Experiment, SeedChangesOutput) {
  ExperimentSpec spec = tiny_spec();
  spec.compute_crlb = false;
  const RunResult r1 = run_experiment(spec);
  spec.scenario.seed = 99;
  const RunResult r2 = run_experiment(spec);
  EXPECT_NE(r1.trials[0].mean_error, r2.trials[0].mean_error);
}

TEST(Metrics, DivergenceFlag) {
  std::vector<double> flat(40, 1.0);
  EXPECT_FALSE(divergence_flag(flat, 0));
  std::vector<double> growing(40);
  for (int t = 0; t < 40; ++t) growing[t] = 1.0 + t;
  // First quarter mean 5.5, last quarter 35.5.
  EXPECT_TRUE(divergence_flag(growing, 0));
  std::vector<double> mild(40);
  for (int t = 0; t < 40; ++t) mild[t] = 10.0 + 0.1 * t;
  EXPECT_FALSE(divergence_flag(mild, 0));
  // Warmup excludes the early spike.
  std::vector<double> spike(40, 1.0);
  for (int t = 0; t < 10; ++t) spike[t] = 100.0;
  EXPECT_FALSE(divergence_flag(spike, 10));
  EXPECT_FALSE(divergence_flag({1, 2, 3}, 0));
}

TEST(Metrics, ConvergenceEpoch) {
  std::vector<double> e(40, 1.0);
  for (int t = 0; t < 8; ++t) e[t] = 50.0;
  // First window of 5 whose mean is <= 2: starts at t = 8 (t = 7 gives 10.8).
  auto c = convergence_epoch(e, false);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(*c, 8);
  EXPECT_FALSE(convergence_epoch(e, true).has_value());
  std::vector<double> settled(40, 1.0);
  EXPECT_EQ(convergence_epoch(settled, false).value(), 0);
  // Late excursion: convergence is the first epoch after which the condition holds.
  std::vector<double> late(40, 1.0);
  late[20] = 100.0;
  EXPECT_EQ(convergence_epoch(late, false).value(), 21);
}

TEST(Behaviour, NoiselessLosConvergesQuickly) {
  ExperimentSpec spec = tiny_spec();
  spec.scenario.epochs = 20;
  spec.scenario.noise = MixtureNoiseModel{1.0, ComponentDistribution::gaussian(0.0, 0.05),
                                          ComponentDistribution::positive_mean_gaussian(5.0, 5.0)};
  spec.scenario.sat_noise = MixtureNoiseModel{1.0, ComponentDistribution::gaussian(0.0, 0.05),
                                              ComponentDistribution::positive_mean_gaussian(5.0, 5.0)};
  spec.scenario.mask_angle_min = spec.scenario.mask_angle_max = 10.0 * kDeg;
  spec.filter.particles = 1000;
  spec.compute_crlb = false;
  spec.compute_ls = false;
  const RunResult r = run_experiment(spec);
  const TrialResult& t = r.trials[0];
  ASSERT_TRUE(t.converged_epoch.has_value());
  EXPECT_LE(*t.converged_epoch, 2);
  EXPECT_LT(t.mean_error, 0.5);
}

TEST(Behaviour, EssBoundedByParticleCount) {
  ExperimentSpec spec = tiny_spec();
  spec.filter.particles = 100;
  spec.filter.ess_threshold = 30;
  spec.compute_crlb = false;
  spec.compute_ls = false;
  const RunResult r = run_experiment(spec);
  const auto& ess = r.trials[0].ess;
  EXPECT_LE(ess.maxCoeff(), 100.0 + 1e-9);
  EXPECT_GE(ess.minCoeff(), 1.0 - 1e-9);
}

// Default noise; the satellite NLOS component (sd 5 m) is tighter than LOS (sd 10 m).
TEST(Behaviour, ErrorNonIncreasingInAlpha) {
  ExperimentSpec spec;
  spec.name = "alpha";
  spec.scenario.lane_count = 2;
  spec.scenario.vehicles_per_lane = 4;
  spec.scenario.epochs = 40;
  spec.filter.particles = 500;
  spec.sweep = SweepVariable::Alpha;
  spec.values = {0.25, 0.5, 0.75, 1.0};
  spec.trials = 20;
  spec.compute_crlb = false;
  spec.compute_ls = false;
  const RunResult r = run_experiment(spec);
  ASSERT_EQ(r.summary.size(), 4u);
  for (std::size_t i = 1; i < r.summary.size(); ++i) {
    EXPECT_LE(r.summary[i].mean_error, r.summary[i - 1].mean_error)
        << "alpha " << r.summary[i].value << " vs " << r.summary[i - 1].value;
  }
}

TEST(Behaviour, FilterBeatsLeastSquaresWithManySatellites) {
  ExperimentSpec spec = tiny_spec();
  spec.scenario.epochs = 30;
  spec.scenario.mask_angle_min = spec.scenario.mask_angle_max = 5.0 * kDeg;
  spec.filter.particles = 1000;
  spec.compute_crlb = false;
  spec.trials = 3;
  const RunResult r = run_experiment(spec);
  for (const auto& t : r.trials) {
    EXPECT_GT(t.ls_fixes, 0);
    EXPECT_LT(t.mean_error, t.ls_mean_error);
  }
}

TEST(Behaviour, BoundsPopulatedAndOrdered) {
  ExperimentSpec spec = tiny_spec();
  spec.compute_ls = false;
  const RunResult r = run_experiment(spec);
  const TrialResult& t = r.trials[0];
  for (int k = 0; k < t.epochs(); ++k) {
    if (!std::isfinite(t.crlb_causal[k])) continue;
    ASSERT_TRUE(std::isfinite(t.crlb_full[k]));
    EXPECT_LE(t.crlb_full[k], t.crlb_causal[k] * (1 + 1e-9));
  }
  EXPECT_TRUE(std::isfinite(t.crlb_causal.back()));
}

TEST(Behaviour, NeffTableShape) {
  ExperimentSpec spec = tiny_spec();
  spec.trials = 1;
  const auto rows = neff_table(spec, {1.0, 3.0});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[0].sigma_r, 1.0);
  EXPECT_GT(rows[0].average_ess, 0.0);
  EXPECT_LE(rows[1].average_ess, spec.filter.particles);
}

TEST(Scaling, ZeroAddedIsExact) {
  AnchorScalingParams ap;
  ap.added = {0};
  ap.deployments = 10;
  const auto a = anchor_scaling_experiment(ap);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].added, 0);
  EXPECT_LT(a[0].rel_err, 1e-9);

  AgentScalingParams gp;
  gp.added = {0};
  gp.deployments = 2;
  const auto g = agent_scaling_experiment(gp);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_LT(g[0].rel_err, 1e-9);
}

TEST(Scaling, WritesCsv) {
  const fs::path dir = scratch("scaling");
  write_scaling(dir / "s.csv", {{0, 1.0, 1.0, 0.0}, {50, 0.5, 0.55, 0.1}});
  EXPECT_EQ(line_count(dir / "s.csv"), 3);
}

TEST(Oracle, ToyScenarioMatchesGrid) {
  const auto cmp = compare_with_grid(make_toy_scenario(3, 4), 20000, 3);
  ASSERT_EQ(cmp.gap.size(), 4u);
  EXPECT_LT(cmp.max_gap(), 0.3);
}

#ifdef COOPNLOS_CLI
namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(COOPNLOS_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  const std::string out = " --out " + (dir / "out").string();
  const fs::path ok = write_config(dir, "ok.json", R"({"lane_count": 1, "vehicles_per_lane": 2, "epochs": 5,
    "filter": {"particles": 100}, "experiment": {"trials": 1}})");
  EXPECT_EQ(run_cli("simulate --config " + ok.string() + out), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "experiment" / "summary.csv"));

  const fs::path bad = write_config(dir, "bad.json", R"({"lane_cnt": 4})");
  EXPECT_EQ(run_cli("simulate --config " + bad.string() + out), 2);
  EXPECT_EQ(run_cli("no-such-command"), 2);
  EXPECT_EQ(run_cli("sweep --sweep alpha=x" + out), 2);

  // No satellites and no vehicle links: the bound is singular.
  const fs::path lonely = write_config(dir, "lonely.json", R"({"lane_count": 1, "vehicles_per_lane": 2,
    "epochs": 3, "comm_radius": 0, "mask_angle_min_deg": 89.99, "mask_angle_max_deg": 89.99,
    "experiment": {"trials": 1}})");
  EXPECT_EQ(run_cli("crlb --config " + lonely.string() + out), 3);
}
#endif
