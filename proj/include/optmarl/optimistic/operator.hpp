#pragma once

// Scalar optimistic update: an estimate that only ever moves up, toward
// rewards that exceed it. A companion lower-bound sequence moves only on the
// maximal reward; together they bracket the optimistic estimate and give a
// closed-form convergence rate.

#include <cmath>

#include "optmarl/errors.hpp"

namespace optmarl::optimistic {

inline void check_learn_rate(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("learn rate must lie in [0, 1]");
}

struct OptimisticScalar {
  double value = 0.0;
  double learn_rate = 0.1;
};

/// Moves toward r by a fraction learn_rate when r exceeds the estimate.
inline OptimisticScalar opt_update(OptimisticScalar f, double r) {
  if (r > f.value) f.value += f.learn_rate * (r - f.value);
  return f;
}

struct LowerBoundScalar {
  double value = 0.0;
  double learn_rate = 0.1;
  double r_max = 0.0;
};

/// Moves toward r_max only when the observed reward is exactly r_max.
inline LowerBoundScalar lower_bound_update(LowerBoundScalar f, double r) {
  if (r == f.r_max) f.value += f.learn_rate * (r - f.value);
  return f;
}

/// Value of the lower-bound sequence after n hits of r_max:
/// r_max + (1 − α)ⁿ (f₀ − r_max).
inline double closed_form_after_n(double f0, double r_max, double alpha, long long n) {
  if (n < 0) throw UsageError("closed_form_after_n: n must be non-negative");
  return r_max + std::pow(1.0 - alpha, static_cast<double>(n)) * (f0 - r_max);
}

}  // namespace optmarl::optimistic
