#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "optmarl/diffcore/graph.hpp"

namespace optmarl::diffcore {

struct RmsPropConfig {
  double lr = 5e-4;
  double decay = 0.99;
  double eps = 1e-5;
};

/// acc ← decay·acc + (1−decay)·g²;  θ ← θ − lr·g/√(acc + eps);  then g ← 0.
inline void rmsprop_step(ParameterStore& store, const RmsPropConfig& cfg) {
  for (auto& [name, p] : store) {
    p.sq_avg = cfg.decay * p.sq_avg + (1.0 - cfg.decay) * p.grad.cwiseAbs2();
    p.value.array() -= cfg.lr * p.grad.array() / (p.sq_avg.array() + cfg.eps).sqrt();
    p.grad.setZero();
  }
}

namespace detail {

inline bool matches(std::string_view name, const std::vector<std::string>& prefixes) {
  if (prefixes.empty()) return true;
  for (const auto& p : prefixes)
    if (name.substr(0, p.size()) == p) return true;
  return false;
}

}  // namespace detail

/// L2 norm of the gradients of entries whose name starts with one of
/// `prefixes` (all entries when empty).
inline double grad_norm(const ParameterStore& store, const std::vector<std::string>& prefixes = {}) {
  double sq = 0.0;
  for (const auto& [name, p] : store)
    if (detail::matches(name, prefixes)) sq += p.grad.squaredNorm();
  return std::sqrt(sq);
}

/// Rescales the selected gradients so their joint norm is at most
/// `max_norm`. Returns the norm before clipping.
inline double clip_grad_norm(ParameterStore& store, double max_norm, const std::vector<std::string>& prefixes = {}) {
  const double norm = grad_norm(store, prefixes);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& [name, p] : store)
      if (detail::matches(name, prefixes)) p.grad *= factor;
  }
  return norm;
}

}  // namespace optmarl::diffcore
