#pragma once

// Subcommand bodies for the optmarl tool, kept out of main() so tests can
// drive them without spawning processes.

#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "optmarl/errors.hpp"
#include "optmarl/kvfile.hpp"
#include "optmarl/networks/checkpoint.hpp"
#include "optmarl/optimistic/probe.hpp"
#include "optmarl/training/trainer.hpp"

namespace optmarl::cli {

namespace fs = std::filesystem;
using diffcore::Matrix;
using training::RunConfig;

inline constexpr const char* kOutRootVar = "OPTMARL_OUT_ROOT";

/// Root under which relative run directories are created.
inline fs::path output_root() {
  const char* env = std::getenv(kOutRootVar);
  return (env != nullptr && *env != '\0') ? fs::path(env) : fs::current_path();
}

inline fs::path run_directory(const RunConfig& cfg, const fs::path& root) {
  const fs::path dir(cfg.resolved_out_dir());
  return dir.is_absolute() ? dir : root / dir;
}

/// Builds a config from an optional key file plus ordered overrides.
inline RunConfig make_config(const std::string& config_file, const kv::Pairs& overrides) {
  kv::Pairs pairs;
  if (!config_file.empty()) pairs = kv::read_file(config_file);
  pairs.insert(pairs.end(), overrides.begin(), overrides.end());
  return RunConfig::from_pairs(pairs);
}

inline void write_table_csv(std::ostream& out, const Matrix& table) {
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.cols(); ++c) out << (c ? "," : "") << kv::format_double(table(r, c));
    out << '\n';
  }
}

inline void save_run_checkpoint(const fs::path& path, training::AgentNetBundle& bundle) {
  networks::NamedArrays arrays;
  networks::export_store(arrays, bundle.live(), "live/");
  networks::export_store(arrays, bundle.target(), "target/");
  networks::save_checkpoint(path.string(), arrays);
}

/// Rebuilds the networks of a finished run from its directory.
inline training::AgentNetBundle load_run_bundle(const fs::path& dir, RunConfig* cfg_out = nullptr) {
  const RunConfig cfg = RunConfig::load((dir / "config.txt").string());
  const auto env = training::make_environment(cfg);
  training::AgentNetBundle bundle(training::bundle_spec(cfg, *env), 0);
  const networks::NamedArrays arrays = networks::load_checkpoint((dir / "checkpoint.bin").string());
  networks::import_store(bundle.live(), arrays, "live/");
  networks::import_store(bundle.target(), arrays, "target/");
  if (cfg_out != nullptr) *cfg_out = cfg;
  return bundle;
}

/// Trains one run and writes config.txt, metrics.csv, checkpoint.bin and,
/// for two-agent games, qtable.csv into its directory. Returns the directory.
inline fs::path execute_run(const RunConfig& cfg, const fs::path& root, std::ostream* progress = nullptr) {
  cfg.validate();
  const fs::path dir = run_directory(cfg, root);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "config.txt");
    out << kv::format(cfg.to_pairs());
    if (!out) throw ConfigError("out_dir: cannot write to " + dir.string());
  }
  std::ofstream metrics(dir / "metrics.csv");
  if (!metrics) throw ConfigError("out_dir: cannot write to " + dir.string());
  metrics << training::metrics_header() << '\n';

  training::TrainingRun run(cfg);
  run.run([&](const training::MetricsRow& row) {
    metrics << training::format_metrics_row(row) << '\n';
    if (progress != nullptr)
      *progress << cfg.resolved_out_dir() << " step " << row.step << " return " << row.eval_mean_return << '\n';
  });
  metrics.close();

  save_run_checkpoint(dir / "checkpoint.bin", run.bundle());
  if (run.environment().n_agents() == 2) {
    std::ofstream q(dir / "qtable.csv");
    write_table_csv(q, training::joint_value_table(run.environment(), run.bundle()));
  }
  return dir;
}

/// Parses "0,1,2", "0-9" or mixtures such as "0-3,7".
inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    part = kv::trim(part);
    if (part.empty()) continue;
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      const long long s = kv::to_int("seeds", part);
      if (s < 0) throw ConfigError("seeds: must be non-negative");
      seeds.push_back(static_cast<std::uint64_t>(s));
    } else {
      const long long lo = kv::to_int("seeds", kv::trim(part.substr(0, dash)));
      const long long hi = kv::to_int("seeds", kv::trim(part.substr(dash + 1)));
      if (lo < 0 || hi < lo) throw ConfigError("seeds: bad range '" + part + "'");
      for (long long s = lo; s <= hi; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  if (seeds.empty()) throw ConfigError("seeds: no seeds given");
  return seeds;
}

/// Runs one isolated worker per seed, at most `jobs` at a time. Each
/// worker owns its networks, buffer and generators and writes its own
/// directory. Returns the directories in seed order.
inline std::vector<fs::path> run_many(const RunConfig& base, const std::vector<std::uint64_t>& seeds, int jobs,
                                      const fs::path& root, std::ostream* progress = nullptr) {
  if (jobs <= 0) throw ConfigError("jobs: must be positive");
  std::vector<RunConfig> configs;
  for (std::uint64_t s : seeds) {
    RunConfig c = base;
    c.seed = s;
    if (!base.out_dir.empty()) c.out_dir = base.out_dir + "/s" + std::to_string(s);
    configs.push_back(c);
  }
  std::vector<fs::path> dirs(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::mutex log_mutex;
  std::size_t next = 0;
  std::mutex next_mutex;

  const auto worker = [&] {
    for (;;) {
      std::size_t k = 0;
      {
        std::lock_guard lock(next_mutex);
        if (next >= configs.size()) return;
        k = next++;
      }
      try {
        dirs[k] = execute_run(configs[k], root, nullptr);
        if (progress != nullptr) {
          std::lock_guard lock(log_mutex);
          *progress << "finished " << dirs[k].string() << '\n';
        }
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };

  std::vector<std::thread> pool;
  const int n = std::min<int>(jobs, static_cast<int>(configs.size()));
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return dirs;
}

/// verify-optimistic report: one row per probed t.
inline void write_probe_report(std::ostream& out, const optimistic::ConvergenceProbeConfig& cfg, double eps_tol) {
  const auto rows = optimistic::convergence_probe(cfg, eps_tol);
  const auto d = kv::format_double;
  out << "t,empirical_tail,markov_bound,mean_f,expected_f,mean_lower,lower_std_error,within_bound\n";
  for (const auto& r : rows) {
    const bool ok = r.empirical_tail <= optimistic::tail_allowance(r.markov_bound, cfg.trials);
    out << r.t << ',' << d(r.empirical_tail) << ',' << d(r.markov_bound) << ',' << d(r.mean_f) << ','
        << d(r.expected_f) << ',' << d(r.mean_lower) << ',' << d(r.lower_std_error) << ',' << (ok ? 1 : 0) << '\n';
  }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream in(line);
  std::string cell;
  while (std::getline(in, cell, ',')) out.push_back(kv::trim(cell));
  return out;
}

inline CsvTable read_numeric_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty csv: " + path.string());
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (kv::trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.header.size()) throw ConfigError("ragged row in " + path.string());
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(kv::to_double(path.string(), c));
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) throw ConfigError("no data rows in " + path.string());
  return t;
}

/// Linear interpolation of column `col` at `step`, clamped at the ends.
inline double interpolate(const CsvTable& t, int step_col, int col, double step) {
  const auto& rows = t.rows;
  const auto s = [&](std::size_t i) { return rows[i][static_cast<std::size_t>(step_col)]; };
  const auto v = [&](std::size_t i) { return rows[i][static_cast<std::size_t>(col)]; };
  if (step <= s(0)) return v(0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (step <= s(i)) {
      const double span = s(i) - s(i - 1);
      const double u = span > 0.0 ? (step - s(i - 1)) / span : 1.0;
      return v(i - 1) + u * (v(i) - v(i - 1));
    }
  }
  return v(rows.size() - 1);
}

/// Mean and min/max envelope across runs for every metric column, on a
/// shared step grid. Runs whose grids differ are resampled onto the
/// coarsest grid (fewest rows) and a warning is written to `warn`.
inline void summarize(const std::vector<fs::path>& inputs, std::ostream& out, std::ostream& warn) {
  if (inputs.empty()) throw UsageError("summarize: at least one run directory is required");
  std::vector<CsvTable> tables;
  for (const auto& p : inputs)
    tables.push_back(read_numeric_csv(fs::is_directory(p) ? p / "metrics.csv" : p));

  const std::vector<std::string>& header = tables.front().header;
  for (const auto& t : tables)
    if (t.header != header) throw ConfigError("summarize: metrics columns differ between runs");
  const int step_col = tables.front().column("step");
  if (step_col < 0) throw ConfigError("summarize: metrics have no step column");

  const auto grid_of = [&](const CsvTable& t) {
    std::vector<double> g;
    for (const auto& r : t.rows) g.push_back(r[static_cast<std::size_t>(step_col)]);
    return g;
  };
  std::size_t coarsest = 0;
  bool mismatch = false;
  for (std::size_t k = 0; k < tables.size(); ++k) {
    if (grid_of(tables[k]) != grid_of(tables[0])) mismatch = true;
    if (tables[k].rows.size() < tables[coarsest].rows.size()) coarsest = k;
  }
  const std::vector<double> grid = grid_of(tables[coarsest]);
  if (mismatch) warn << "warning: step grids differ across runs; resampled onto the grid of " << inputs[coarsest].string() << '\n';

  out << "step";
  for (std::size_t c = 0; c < header.size(); ++c)
    if (static_cast<int>(c) != step_col) out << ',' << header[c] << "_mean," << header[c] << "_min," << header[c] << "_max";
  out << '\n';
  const auto d = kv::format_double;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out << d(grid[i]);
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (static_cast<int>(c) == step_col) continue;
      double sum = 0.0, lo = INFINITY, hi = -INFINITY;
      for (const auto& t : tables) {
        const double v = mismatch ? interpolate(t, step_col, static_cast<int>(c), grid[i]) : t.rows[i][c];
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      out << ',' << d(sum / static_cast<double>(tables.size())) << ',' << d(lo) << ',' << d(hi);
    }
    out << '\n';
  }
}

/// Recomputes the joint-action value table of a finished two-agent run.
inline Matrix dump_qtable(const fs::path& dir) {
  RunConfig cfg;
  training::AgentNetBundle bundle = load_run_bundle(dir, &cfg);
  const auto env = training::make_environment(cfg);
  if (env->n_agents() != 2) throw UsageError("dump-qtable: needs a two-agent environment, got " + cfg.env);
  return training::joint_value_table(*env, bundle);
}

}  // namespace optmarl::cli
