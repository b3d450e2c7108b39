#pragma once

#include <cstdint>
#include <string>

#include "optmarl/kvfile.hpp"
#include "optmarl/networks/bundle.hpp"
#include "optmarl/training/learner.hpp"

namespace optmarl::training {

/// Flat description of one experiment. Every key has a default; the
/// defaults depend on the environment (see preset()).
struct RunConfig {
  std::string env = "matrix";
  std::string env_config;  // predator-prey key file; empty for built-in defaults
  std::string algo = "opt-qmix";
  std::uint64_t seed = 0;
  long long steps = 20000;
  TrainConfig train;
  int buffer = 5000;
  double eps_start = 1.0;
  double eps_end = 1.0;
  long long eps_horizon = 1;
  bool optnorm = false;
  double optnorm_cap_end = 2.0;
  long long optnorm_horizon = 20000;
  long long eval_interval = 1000;
  int eval_episodes = 1;
  int hidden = 64;
  int embed = 32;
  int critic_feature = 32;
  std::string out_dir;  // empty: <env>-<algo>-s<seed> under the output root

  /// Defaults for an environment: the matrix game explores fully for 20k
  /// steps; predator-prey anneals ε from 1 to 0.05 over 200k steps and
  /// ramps the optimistic normalisation cap from 0 to 2 over 20k steps.
  static RunConfig preset(const std::string& env) {
    RunConfig c;
    c.env = env;
    if (env == "matrix") return c;
    if (env == "predprey") {
      c.steps = 200000;
      c.eps_start = 1.0;
      c.eps_end = 0.05;
      c.eps_horizon = 200000;
      c.optnorm = true;
      c.optnorm_cap_end = 2.0;
      c.optnorm_horizon = 20000;
      c.eval_interval = 1000;
      c.eval_episodes = 32;
      return c;
    }
    throw ConfigError("env: unknown environment '" + env + "' (expected matrix or predprey)");
  }

  networks::Algo algorithm() const { return networks::parse_algo(algo); }

  std::string resolved_out_dir() const {
    return out_dir.empty() ? env + "-" + algo + "-s" + std::to_string(seed) : out_dir;
  }

  void set(const std::string& key, const std::string& v) {
    if (key == "env") {
      RunConfig::preset(v);
      env = v;
    } else if (key == "env_config") env_config = v;
    else if (key == "algo") {
      networks::parse_algo(v);
      algo = v;
    } else if (key == "seed") {
      const long long s = kv::to_int(key, v);
      if (s < 0) throw ConfigError("seed: must be non-negative");
      seed = static_cast<std::uint64_t>(s);
    } else if (key == "steps") steps = kv::to_int(key, v);
    else if (key == "gamma") train.gamma = kv::to_double(key, v);
    else if (key == "lr") train.lr = kv::to_double(key, v);
    else if (key == "batch") train.batch = static_cast<int>(kv::to_int(key, v));
    else if (key == "w") train.w = kv::to_double(key, v);
    else if (key == "target_sync") train.target_sync = static_cast<int>(kv::to_int(key, v));
    else if (key == "train_interval") train.train_interval = static_cast<int>(kv::to_int(key, v));
    else if (key == "grad_clip") train.grad_clip = kv::to_double(key, v);
    else if (key == "rms_decay") train.rms_decay = kv::to_double(key, v);
    else if (key == "rms_eps") train.rms_eps = kv::to_double(key, v);
    else if (key == "buffer") buffer = static_cast<int>(kv::to_int(key, v));
    else if (key == "eps_start") eps_start = kv::to_double(key, v);
    else if (key == "eps_end") eps_end = kv::to_double(key, v);
    else if (key == "eps_horizon") eps_horizon = kv::to_int(key, v);
    else if (key == "optnorm") optnorm = kv::to_bool(key, v);
    else if (key == "optnorm_cap_end") optnorm_cap_end = kv::to_double(key, v);
    else if (key == "optnorm_horizon") optnorm_horizon = kv::to_int(key, v);
    else if (key == "eval_interval") eval_interval = kv::to_int(key, v);
    else if (key == "eval_episodes") eval_episodes = static_cast<int>(kv::to_int(key, v));
    else if (key == "hidden") hidden = static_cast<int>(kv::to_int(key, v));
    else if (key == "embed") embed = static_cast<int>(kv::to_int(key, v));
    else if (key == "critic_feature") critic_feature = static_cast<int>(kv::to_int(key, v));
    else if (key == "out_dir") out_dir = v;
    else throw ConfigError(key + ": unknown configuration key");
  }

  kv::Pairs to_pairs() const {
    const auto d = kv::format_double;
    return {{"env", env},
            {"env_config", env_config},
            {"algo", algo},
            {"seed", std::to_string(seed)},
            {"steps", std::to_string(steps)},
            {"gamma", d(train.gamma)},
            {"lr", d(train.lr)},
            {"batch", std::to_string(train.batch)},
            {"w", d(train.w)},
            {"target_sync", std::to_string(train.target_sync)},
            {"train_interval", std::to_string(train.train_interval)},
            {"grad_clip", d(train.grad_clip)},
            {"rms_decay", d(train.rms_decay)},
            {"rms_eps", d(train.rms_eps)},
            {"buffer", std::to_string(buffer)},
            {"eps_start", d(eps_start)},
            {"eps_end", d(eps_end)},
            {"eps_horizon", std::to_string(eps_horizon)},
            {"optnorm", optnorm ? "true" : "false"},
            {"optnorm_cap_end", d(optnorm_cap_end)},
            {"optnorm_horizon", std::to_string(optnorm_horizon)},
            {"eval_interval", std::to_string(eval_interval)},
            {"eval_episodes", std::to_string(eval_episodes)},
            {"hidden", std::to_string(hidden)},
            {"embed", std::to_string(embed)},
            {"critic_feature", std::to_string(critic_feature)},
            {"out_dir", out_dir}};
  }

  /// Applies `pairs` on top of the preset of the environment they name
  /// (matrix when absent).
  static RunConfig from_pairs(const kv::Pairs& pairs) {
    std::string env_name = "matrix";
    for (const auto& [k, v] : pairs)
      if (k == "env") env_name = v;
    RunConfig c = preset(env_name);
    for (const auto& [k, v] : pairs) c.set(k, v);
    c.validate();
    return c;
  }

  static RunConfig load(const std::string& path) { return from_pairs(kv::read_file(path)); }

  void validate() const {
    preset(env);
    networks::parse_algo(algo);
    train.validate();
    if (steps <= 0) throw ConfigError("steps: must be positive");
    if (buffer <= 0) throw ConfigError("buffer: must be positive");
    if (train.batch > buffer) throw ConfigError("batch: must not exceed buffer");
    if (!(eps_start >= 0.0 && eps_start <= 1.0)) throw ConfigError("eps_start: must lie in [0, 1]");
    if (!(eps_end >= 0.0 && eps_end <= 1.0)) throw ConfigError("eps_end: must lie in [0, 1]");
    if (eps_horizon < 0) throw ConfigError("eps_horizon: must be non-negative");
    if (optnorm_cap_end < 0.0) throw ConfigError("optnorm_cap_end: must be non-negative");
    if (optnorm_horizon < 0) throw ConfigError("optnorm_horizon: must be non-negative");
    if (eval_interval <= 0) throw ConfigError("eval_interval: must be positive");
    if (eval_episodes <= 0) throw ConfigError("eval_episodes: must be positive");
    if (hidden <= 0) throw ConfigError("hidden: must be positive");
    if (embed <= 0) throw ConfigError("embed: must be positive");
    if (critic_feature <= 0) throw ConfigError("critic_feature: must be positive");
  }
};

}  // namespace optmarl::training
