// diffdsr command-line driver.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

using namespace diffdsr;
namespace cmd = diffdsr::commands;

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumeric = 4 };

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::vector<std::string> overrides;
  std::optional<double> tau;
  std::optional<double> alpha_min;
  std::string rule;
  std::vector<std::string> ablations;

  PipelineConfig load() const {
    PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      set_config_value(c, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
    }
    if (seed) c.seed = *seed;
    if (tau) c.tau = *tau;
    if (alpha_min) c.alpha_min = *alpha_min;
    if (!rule.empty()) set_config_value(c, "selection.rule", rule);
    if (!ablations.empty()) {
      c.ablations.clear();
      for (const auto& a : ablations) c.ablations.push_back(parse_ablation(a));
    }
    c.validate();
    return c;
  }
};

void add_common(CLI::App* sub, Common& o) {
  sub->add_option("--config", o.config_path, "Configuration file (key = value)");
  sub->add_option("--seed", o.seed, "Run seed");
  sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--set", o.overrides, "Override a config key (key=value), repeatable")->allow_extra_args(false);
  sub->add_option("--tau", o.tau, "Selection threshold");
  sub->add_option("--alpha-min", o.alpha_min, "Lower clamp for the selected alpha_bar");
  sub->add_option("--rule", o.rule, "Selection rule")->check(CLI::IsMember({"simplified", "threshold"}));
  sub->add_option("--ablation", o.ablations, "Variant(s): none, random-t, gaussian-noise, no-diffusion")
      ->delimiter(',');
}

void print_summary(const cmd::RunResult& r) {
  std::printf("%-15s %10s %10s %10s %8s\n", "variant", "rmse", "mae", "delta105", "alpha");
  for (const auto& v : r.variants)
    std::printf("%-15s %10.5f %10.5f %10.5f %8.4f\n", to_string(v.variant).c_str(), v.corpus.rmse, v.corpus.mae,
                v.corpus.delta_105, v.mean_alpha_bar);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive-timestep diffusion depth super-resolution (desk-scale)"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  Common common;
  add_common(&app, common);
  auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus");
  auto* degrade = app.add_subcommand("degrade", "Degrade every scene of a corpus");
  auto* run = app.add_subcommand("run", "Run the pipeline over a corpus");

  double lambda = 2.0, omega = 1.0;
  std::size_t grid = 10000;
  std::string csv;
  auto* prop = app.add_subcommand("verify-prop", "Check the maximiser of the trade-off objective");
  prop->add_option("--lambda", lambda, "Distance weight")->check(CLI::PositiveNumber);
  prop->add_option("--omega", omega, "Distance scale")->check(CLI::PositiveNumber);
  prop->add_option("--grid", grid, "Grid size")->check(CLI::Range(3, 100000000));
  prop->add_option("--csv", csv, "Write (alpha_bar, H) samples here");

  std::size_t scene = 0;
  auto* contraction = app.add_subcommand("contraction", "Wasserstein distances across the schedule");
  contraction->add_option("--scene", scene, "Scene index");
  contraction->add_option("--csv", csv, "Output CSV (default: <output>/contraction_<id>.csv)");

  std::vector<double> taus;
  auto* sweep = app.add_subcommand("sweep-tau", "Corpus metrics for a list of tau values");
  sweep->add_option("--taus", taus, "Comma-separated tau list")->delimiter(',');

  std::string write_config;
  auto* fit = app.add_subcommand("fit-sigma", "Fit the calibration scale on a corpus");
  fit->add_option("--write-config", write_config, "Save the configuration with the fitted scale");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) {
      const auto m = cmd::cmd_gen(common.load());
      std::printf("wrote %zu scenes\n", m.at("scenes").size());
    } else if (*degrade) {
      const auto m = cmd::cmd_degrade(common.load());
      std::printf("degraded %zu scenes (spec %s)\n", m.at("scenes").size(),
                  m.at("spec_hash").get<std::string>().c_str());
    } else if (*run) {
      print_summary(cmd::cmd_run(common.load(), common.jobs));
    } else if (*prop) {
      const auto r = cmd::cmd_verify_prop(TradeoffParams{lambda, omega}, grid, csv);
      std::printf("analytic %.9g grid %.9g gap %.3g resolution %.3g sign_changes %zu\n", r.analytic, r.grid_argmax,
                  r.gap, r.resolution, r.sign_changes);
    } else if (*contraction) {
      const PipelineConfig c = common.load();
      const std::string path =
          csv.empty() ? (std::filesystem::path(c.output_dir) / ("contraction_" + cmd::scene_id(scene) + ".csv")).string()
                      : csv;
      const auto rows = cmd::cmd_contraction(c, scene, path);
      std::printf("t=1 exact %.6g surrogate %.6g; t=%zu exact %.6g surrogate %.6g\n", rows.front().exact,
                  rows.front().surrogate, rows.back().t, rows.back().exact, rows.back().surrogate);
    } else if (*sweep) {
      PipelineConfig c = common.load();
      if (!taus.empty()) c.sweep_taus = taus;
      std::printf("%8s %10s %10s %10s\n", "tau", "rmse", "mae", "alpha");
      for (const auto& r : cmd::cmd_sweep_tau(c, common.jobs))
        std::printf("%8.4f %10.5f %10.5f %10.4f\n", r.tau, r.corpus.rmse, r.corpus.mae, r.mean_alpha_bar);
    } else if (*fit) {
      PipelineConfig c = common.load();
      const auto r = cmd::cmd_fit_sigma(c);
      std::printf("sigma_scale %.9g coverage %.4f nll %.6g\n", r.sigma_scale, r.coverage, r.nll);
      if (!write_config.empty()) {
        c.calibration.sigma_scale = r.sigma_scale;
        save_config(write_config, c);
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
