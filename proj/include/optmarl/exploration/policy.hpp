#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "optmarl/errors.hpp"

namespace optmarl::exploration {

/// start + (end − start)·min(t/horizon, 1).
struct LinearSchedule {
  double start = 1.0;
  double end = 0.05;
  long long horizon = 200000;

  double value(long long t) const {
    if (t < 0) throw UsageError("schedule time must be non-negative");
    if (t >= horizon) return end;
    return start + (end - start) * (static_cast<double>(t) / static_cast<double>(horizon));
  }
};

inline double anneal(const LinearSchedule& s, long long t) { return s.value(t); }

/// Probabilities over an agent's actions.
using ActionDistribution = std::vector<double>;

using Mask = std::span<const std::uint8_t>;

namespace detail {

inline bool allowed(Mask mask, std::size_t a) { return mask.empty() || mask[a] != 0; }

inline void check_mask(Mask mask, std::size_t n) {
  if (!mask.empty() && mask.size() != n) throw UsageError("action mask length does not match action count");
}

}  // namespace detail

/// Index of the largest allowed entry; ties go to the lowest index.
inline int argmax(std::span<const double> values, Mask mask = {}) {
  if (values.empty()) throw UsageError("argmax of an empty vector");
  detail::check_mask(mask, values.size());
  int best = -1;
  for (std::size_t a = 0; a < values.size(); ++a) {
    if (!detail::allowed(mask, a)) continue;
    if (best < 0 || values[a] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(a);
  }
  if (best < 0) throw UsageError("all actions are masked");
  return best;
}

/// Uniform mass ε over allowed actions plus 1 − ε on the greedy one.
inline ActionDistribution epsilon_greedy_dist(std::span<const double> q, double epsilon, Mask mask = {}) {
  if (q.empty()) throw UsageError("epsilon_greedy_dist: empty utility vector");
  const int best = argmax(q, mask);
  std::size_t allowed = 0;
  for (std::size_t a = 0; a < q.size(); ++a) allowed += detail::allowed(mask, a) ? 1 : 0;
  ActionDistribution p(q.size(), 0.0);
  for (std::size_t a = 0; a < q.size(); ++a)
    if (detail::allowed(mask, a)) p[a] = epsilon / static_cast<double>(allowed);
  p[static_cast<std::size_t>(best)] += 1.0 - epsilon;
  return p;
}

/// Affine map of f onto [0, cap]. A constant vector maps to zeros.
inline std::vector<double> normalize_opt(std::span<const double> f, double cap) {
  if (cap < 0.0) throw UsageError("normalize_opt: cap must be non-negative");
  std::vector<double> out(f.size(), 0.0);
  if (f.empty()) return out;
  const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t a = 0; a < f.size(); ++a) out[a] = (f[a] - *lo) / range * cap;
  return out;
}

namespace detail {

// scale·softmax(f) evaluated as (scale·e_a)/z. At the maximiser e_a = 1 and
// z ≤ |A|, so the result never rounds below scale/|A|.
inline std::vector<double> scaled_softmax(std::span<const double> f, Mask mask, double scale) {
  check_mask(mask, f.size());
  double hi = -INFINITY;
  for (std::size_t a = 0; a < f.size(); ++a)
    if (allowed(mask, a)) hi = std::max(hi, f[a]);
  if (hi == -INFINITY) throw UsageError("softmax: all actions are masked");
  std::vector<double> out(f.size(), 0.0);
  double z = 0.0;
  for (std::size_t a = 0; a < f.size(); ++a) {
    if (!allowed(mask, a)) continue;
    out[a] = std::exp(f[a] - hi);
    z += out[a];
  }
  for (double& v : out) v = scale * v / z;
  return out;
}

}  // namespace detail

/// Softmax over allowed entries; masked entries receive 0.
inline std::vector<double> softmax(std::span<const double> f, Mask mask = {}) {
  return detail::scaled_softmax(f, mask, 1.0);
}

/// ε·softmax(f) plus 1 − ε on argmax q. When the allowed entries of f are
/// all equal this reduces to epsilon_greedy_dist.
inline ActionDistribution optimistic_epsilon_greedy_dist(std::span<const double> q, std::span<const double> f,
                                                         double epsilon, Mask mask = {}) {
  if (q.size() != f.size()) throw UsageError("optimistic_epsilon_greedy_dist: q and f lengths differ");
  if (q.empty()) throw UsageError("optimistic_epsilon_greedy_dist: empty utility vector");
  const int best = argmax(q, mask);
  ActionDistribution p = detail::scaled_softmax(f, mask, epsilon);
  p[static_cast<std::size_t>(best)] += 1.0 - epsilon;
  return p;
}

/// Inverse-CDF draw from a distribution.
template <typename Rng>
int sample(const ActionDistribution& p, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  int last = -1;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p[a] <= 0.0) continue;
    acc += p[a];
    last = static_cast<int>(a);
    if (x < acc) return last;
  }
  if (last < 0) throw UsageError("sample: distribution has no mass");
  return last;
}

}  // namespace optmarl::exploration
