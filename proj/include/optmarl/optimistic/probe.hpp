#pragma once

// Monte-Carlo probes of the optimistic update's convergence: each trial feeds
// an optimistic estimate and its lower-bound companion the same reward
// stream, where the maximal reward arrives with probability c per step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "optmarl/errors.hpp"
#include "optmarl/optimistic/operator.hpp"

namespace optmarl::optimistic {

struct ConvergenceProbeConfig {
  double c = 0.3;              // probability a step yields r_max
  double learn_rate = 0.5;
  double f0 = 0.0;
  double r_max = 8.0;
  std::vector<double> non_max_rewards{-12.0, 0.0};  // drawn uniformly otherwise
  int horizon = 30;
  int trials = 100000;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(c > 0.0)) throw ConfigError("c must be positive");
    if (c > 1.0) throw ConfigError("c must not exceed 1");
    check_learn_rate(learn_rate);
    if (f0 > r_max) throw ConfigError("f0 must not exceed r_max");
    if (horizon < 0) throw ConfigError("horizon must be non-negative");
    if (trials <= 0) throw ConfigError("trials must be positive");
    if (non_max_rewards.empty() && c < 1.0) throw ConfigError("non-max reward set is empty but c < 1");
    for (double r : non_max_rewards)
      if (!(r < r_max)) throw ConfigError("non-max rewards must lie strictly below r_max");
  }
};

/// E[f′_t] = r_max + (f₀ − r_max)(1 − cα)ᵗ.
inline double expected_lower_bound(const ConvergenceProbeConfig& cfg, long long t) {
  if (t < 0) throw UsageError("expected_lower_bound: t must be non-negative");
  return cfg.r_max + (cfg.f0 - cfg.r_max) * std::pow(1.0 - cfg.c * cfg.learn_rate, static_cast<double>(t));
}

/// Markov-inequality bound on P(r_max − f_t ≥ ε): (r_max − f₀)(1 − cα)ᵗ / ε.
inline double markov_tail_bound(const ConvergenceProbeConfig& cfg, long long t, double eps_tol) {
  return (cfg.r_max - cfg.f0) * std::pow(1.0 - cfg.c * cfg.learn_rate, static_cast<double>(t)) / eps_tol;
}

struct ProbeRow {
  int t = 0;
  double empirical_tail = 0.0;  // fraction of trials with r_max − f_t ≥ ε
  double markov_bound = 0.0;
  double mean_f = 0.0;          // mean optimistic estimate
  double expected_f = 0.0;      // closed-form E[f′_t]
  double mean_lower = 0.0;      // Monte-Carlo mean of f′_t
  double lower_std_error = 0.0; // standard error of mean_lower
};

/// Simulates cfg.trials independent runs for t = 0..horizon.
inline std::vector<ProbeRow> convergence_probe(const ConvergenceProbeConfig& cfg, double eps_tol) {
  cfg.validate();
  if (!(eps_tol > 0.0)) throw ConfigError("eps_tol must be positive");
  const std::size_t steps = static_cast<std::size_t>(cfg.horizon) + 1;
  std::vector<long long> tail(steps, 0);
  std::vector<double> sum_f(steps, 0.0), sum_lower(steps, 0.0), sum_lower_sq(steps, 0.0);

  std::mt19937_64 rng(cfg.seed);
  std::bernoulli_distribution hit(cfg.c);
  const int n_other = static_cast<int>(cfg.non_max_rewards.size());
  std::uniform_int_distribution<int> pick(0, n_other > 0 ? n_other - 1 : 0);

  for (int trial = 0; trial < cfg.trials; ++trial) {
    OptimisticScalar f{cfg.f0, cfg.learn_rate};
    LowerBoundScalar lower{cfg.f0, cfg.learn_rate, cfg.r_max};
    for (std::size_t t = 0; t < steps; ++t) {
      if (cfg.r_max - f.value >= eps_tol) ++tail[t];
      sum_f[t] += f.value;
      sum_lower[t] += lower.value;
      sum_lower_sq[t] += lower.value * lower.value;
      const double r = hit(rng) ? cfg.r_max : cfg.non_max_rewards[static_cast<std::size_t>(pick(rng))];
      f = opt_update(f, r);
      lower = lower_bound_update(lower, r);
    }
  }

  const double m = static_cast<double>(cfg.trials);
  std::vector<ProbeRow> rows(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    ProbeRow& row = rows[t];
    row.t = static_cast<int>(t);
    row.empirical_tail = static_cast<double>(tail[t]) / m;
    row.markov_bound = markov_tail_bound(cfg, row.t, eps_tol);
    row.mean_f = sum_f[t] / m;
    row.expected_f = expected_lower_bound(cfg, row.t);
    row.mean_lower = sum_lower[t] / m;
    const double var = std::max(0.0, sum_lower_sq[t] / m - row.mean_lower * row.mean_lower);
    row.lower_std_error = std::sqrt(var * m / std::max(1.0, m - 1.0) / m);
  }
  return rows;
}

/// Three-sigma allowance for an empirical frequency estimated from `trials`
/// draws whose true probability is at most `bound`.
inline double tail_allowance(double bound, int trials) {
  const double p = std::clamp(bound, 0.0, 1.0);
  return bound + 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

}  // namespace optmarl::optimistic
