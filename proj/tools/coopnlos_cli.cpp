#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coopnlos/config.hpp"
#include "coopnlos/harness.hpp"

using namespace coopnlos;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<int> trials;
  std::string sweep;
  bool debug_truth = false;
  std::optional<int> particles;
  std::optional<double> ess_threshold;
};

ExperimentSpec load(const Options& o, const std::string& default_name) {
  ExperimentSpec spec = o.config.empty() ? ExperimentSpec{} : load_experiment(o.config);
  if (o.config.empty()) spec.name = default_name;
  if (o.seed) spec.scenario.seed = *o.seed;
  if (o.trials) spec.trials = *o.trials;
  if (o.particles) spec.filter.particles = *o.particles;
  if (o.ess_threshold) spec.filter.ess_threshold = *o.ess_threshold;
  if (o.debug_truth) {
    spec.debug_truth = true;
    spec.write_measurements = true;
  }
  if (!o.sweep.empty()) {
    const auto eq = o.sweep.find('=');
    if (eq == std::string::npos) throw ConfigError("--sweep expects NAME=v1,v2,...");
    spec.sweep = sweep_variable_from_string(o.sweep.substr(0, eq));
    spec.values.clear();
    std::stringstream ss(o.sweep.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        spec.values.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError("--sweep: '" + item + "' is not a number");
      }
    }
  }
  spec.validate();
  return spec;
}

void print_summary(const RunResult& r) {
  std::cout << "sweep_value,trials,failed,mean_err_m,p05_err_m,p95_err_m,crlb_causal_m,avg_ess,divergence_rate,"
               "ls_mean_err_m,median_convergence_epoch\n";
  for (const auto& s : r.summary) {
    std::cout << format_value(s.value) << ',' << s.trials << ',' << s.failed << ',' << s.mean_error << ','
              << s.p05_error << ',' << s.p95_error << ',' << s.crlb_causal_rms << ',' << s.average_ess << ','
              << s.divergence_rate << ',' << s.ls_mean_error << ',' << s.median_convergence << '\n';
  }
  for (const auto& t : r.trials)
    if (t.failed) std::cerr << "trial " << t.trial << " failed: " << t.failure << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative NLOS localization workbench"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "base RNG seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--trials", o.trials, "trials per sweep point");
    sub->add_option("--particles", o.particles, "particles per vehicle");
    sub->add_option("--ess-threshold", o.ess_threshold, "resampling threshold on the effective sample size");
  };

  auto* simulate = app.add_subcommand("simulate", "run the filter on one or more realizations");
  common(simulate);
  simulate->add_flag("--debug-truth", o.debug_truth, "dump measurements including the hidden LOS flag");

  auto* crlb = app.add_subcommand("crlb", "full and causal bounds for realizations, no filtering");
  common(crlb);

  auto* sweep = app.add_subcommand("sweep", "parameter sweep");
  common(sweep);
  sweep->add_option("--sweep", o.sweep, "NAME=v1,v2,... with NAME in mask_angle|sigma_r|alpha|sigma_ins|radius|none");
  sweep->add_flag("--debug-truth", o.debug_truth, "dump measurements including the hidden LOS flag");

  auto* neff = app.add_subcommand("neff-table", "average effective sample size versus ranging noise");
  common(neff);
  std::vector<double> sigmas = {1, 2, 3, 4, 5};
  neff->add_option("--sigma-r", sigmas, "ranging noise levels, m");

  auto* scaling = app.add_subcommand("scaling", "anchor/agent scaling-law validation");
  common(scaling);
  std::string kind = "anchors";
  scaling->add_option("--kind", kind, "anchors or agents")->check(CLI::IsMember({"anchors", "agents"}));
  int deployments = 0;
  scaling->add_option("--deployments", deployments, "random deployments per point");

  auto* oracle = app.add_subcommand("oracle-check", "particle filter versus the exact grid filter on a toy case");
  common(oracle);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const std::filesystem::path out = o.out;
    if (simulate->parsed() || sweep->parsed()) {
      const RunResult r = run_experiment(load(o, simulate->parsed() ? "simulate" : "sweep"), out);
      print_summary(r);
    } else if (crlb->parsed()) {
      ExperimentSpec spec = load(o, "crlb");
      spec.filter.particles = 1;
      spec.filter.ess_threshold = 1;
      spec.compute_ls = false;
      spec.compute_crlb = true;
      const auto points = spec.points();
      for (int p = 0; p < static_cast<int>(points.size()); ++p) {
        ScenarioConfig cfg = apply_sweep(spec.scenario, spec.sweep, points[p]);
        for (int k = 0; k < spec.trials; ++k) {
          cfg.seed = trial_seed(spec.scenario.seed, k);
          const TrialResult tr = run_trial(spec, cfg, k, points[p]);
          for (double v : tr.crlb_causal) {
            if (!std::isfinite(v)) throw NumericalError("causal bound singular: network not localizable");
          }
          write_crlb(out / spec.name / format_value(points[p]) / ("trial_" + std::to_string(k) + "_crlb.csv"), tr);
          std::cout << format_value(points[p]) << " trial " << k << ": final causal trace " << tr.crlb_causal.back()
                    << " m^2, full " << tr.crlb_full.back() << " m^2\n";
        }
      }
    } else if (neff->parsed()) {
      ExperimentSpec spec = load(o, "neff");
      const auto rows = neff_table(spec, sigmas);
      write_neff(out / spec.name / "neff.csv", rows);
      std::cout << "sigma_r,avg_ess\n";
      for (const auto& r : rows) std::cout << r.sigma_r << ',' << r.average_ess << '\n';
    } else if (scaling->parsed()) {
      const std::uint64_t seed = o.seed.value_or(1);
      std::vector<ScalingRow> rows;
      if (kind == "anchors") {
        AnchorScalingParams p;
        p.seed = seed;
        if (deployments > 0) p.deployments = deployments;
        rows = anchor_scaling_experiment(p);
      } else {
        AgentScalingParams p;
        p.seed = seed;
        if (deployments > 0) p.deployments = deployments;
        rows = agent_scaling_experiment(p);
      }
      write_scaling(out / ("scaling_" + kind) / "summary.csv", rows);
      std::cout << "m_tilde,predicted_trace,empirical_trace,rel_err\n";
      for (const auto& r : rows) std::cout << r.added << ',' << r.predicted << ',' << r.empirical << ',' << r.rel_err << '\n';
    } else if (oracle->parsed()) {
      const std::uint64_t seed = o.seed.value_or(1);
      const auto cmp = compare_with_grid(make_toy_scenario(seed), o.particles.value_or(100000), seed);
      std::cout << "epoch,grid_x,grid_y,pf_x,pf_y,gap_m\n";
      for (std::size_t t = 0; t < cmp.gap.size(); ++t) {
        std::cout << t << ',' << cmp.grid_mean[t].x() << ',' << cmp.grid_mean[t].y() << ',' << cmp.pf_mean[t].x()
                  << ',' << cmp.pf_mean[t].y() << ',' << cmp.gap[t] << '\n';
      }
      std::cout << "max gap " << cmp.max_gap() << " m\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
