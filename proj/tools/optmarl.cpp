// optmarl: run, run-many, verify-optimistic, summarize, dump-qtable.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "optmarl/cli/commands.hpp"

namespace {

using namespace optmarl;

/// Registers one --key flag per RunConfig key; values are collected in the
/// order given and applied on top of any --config file.
struct ConfigFlags {
  std::string config_file;
  std::vector<std::pair<std::string, std::optional<std::string>>> values;

  void attach(CLI::App& app) {
    app.add_option("--config", config_file, "key = value file applied before flag overrides");
    const auto keys = training::RunConfig{}.to_pairs();
    values.reserve(keys.size());
    for (const auto& [key, def] : keys) {
      values.emplace_back(key, std::nullopt);
      std::string names = "--" + key;
      std::string dashed = key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      if (dashed != key) names += ",--" + dashed;
      app.add_option(names, values.back().second, "config key '" + key + "'");
    }
  }

  kv::Pairs overrides() const {
    kv::Pairs out;
    for (const auto& [k, v] : values)
      if (v) out.emplace_back(k, *v);
    return out;
  }

  training::RunConfig build() const { return cli::make_config(config_file, overrides()); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative value-decomposition Q-learning with optimistic exploration"};
  app.require_subcommand(1);

  ConfigFlags run_flags;
  auto* run = app.add_subcommand("run", "train one seeded run and write its artifacts");
  run_flags.attach(*run);
  bool quiet = false;
  run->add_flag("--quiet", quiet, "no progress lines");

  ConfigFlags many_flags;
  auto* many = app.add_subcommand("run-many", "train one isolated worker per seed");
  many_flags.attach(*many);
  std::string seeds = "0-9";
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  many->add_option("--seeds", seeds, "seed list, e.g. 0-9 or 0,2,5")->capture_default_str();
  many->add_option("--jobs", jobs, "parallel workers")->capture_default_str();

  optimistic::ConvergenceProbeConfig probe;
  double eps_tol = 1.0;
  std::string probe_out;
  auto* verify = app.add_subcommand("verify-optimistic", "Monte-Carlo report on the optimistic update");
  verify->add_option("--c", probe.c, "probability a step yields r_max")->capture_default_str();
  verify->add_option("--alpha", probe.learn_rate, "learning rate of the update")->capture_default_str();
  verify->add_option("--f0", probe.f0, "initial estimate")->capture_default_str();
  verify->add_option("--r-max,--r_max", probe.r_max, "maximal reward")->capture_default_str();
  verify->add_option("--horizon", probe.horizon, "last probed step")->capture_default_str();
  verify->add_option("--trials", probe.trials, "independent reward streams")->capture_default_str();
  verify->add_option("--seed", probe.seed, "generator seed")->capture_default_str();
  verify->add_option("--eps-tol,--eps_tol", eps_tol, "tail tolerance")->capture_default_str();
  verify->add_option("--out", probe_out, "CSV path (default stdout)");

  std::vector<std::string> run_dirs;
  std::string summary_out;
  auto* summarize = app.add_subcommand("summarize", "per-step mean and min/max envelope across runs");
  summarize->add_option("runs", run_dirs, "run directories or metrics.csv files")->required();
  summarize->add_option("--out", summary_out, "CSV path (default stdout)");

  std::string qtable_dir;
  auto* dump = app.add_subcommand("dump-qtable", "joint-action value table of a finished two-agent run");
  dump->add_option("run", qtable_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const training::RunConfig cfg = run_flags.build();
      const auto dir = cli::execute_run(cfg, cli::output_root(), quiet ? nullptr : &std::cerr);
      std::cout << dir.string() << '\n';
    } else if (*many) {
      const training::RunConfig cfg = many_flags.build();
      const auto dirs = cli::run_many(cfg, cli::parse_seed_list(seeds), jobs, cli::output_root(), &std::cerr);
      for (const auto& d : dirs) std::cout << d.string() << '\n';
    } else if (*verify) {
      if (probe_out.empty()) {
        cli::write_probe_report(std::cout, probe, eps_tol);
      } else {
        std::ofstream out(probe_out);
        if (!out) throw ConfigError("out: cannot write " + probe_out);
        cli::write_probe_report(out, probe, eps_tol);
      }
    } else if (*summarize) {
      std::vector<cli::fs::path> paths(run_dirs.begin(), run_dirs.end());
      if (summary_out.empty()) {
        cli::summarize(paths, std::cout, std::cerr);
      } else {
        std::ofstream out(summary_out);
        if (!out) throw ConfigError("out: cannot write " + summary_out);
        cli::summarize(paths, out, std::cerr);
      }
    } else if (*dump) {
      cli::write_table_csv(std::cout, cli::dump_qtable(qtable_dir));
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
