#pragma once

#include <cmath>
#include <random>
#include <string>

#include "optmarl/diffcore/graph.hpp"
#include "optmarl/diffcore/ops.hpp"

namespace optmarl::diffcore {

using Rng = std::mt19937_64;

inline void init_uniform(Matrix& m, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
}

/// Fully connected layer `name.w` (out×in), `name.b` (1×out).
struct DenseLayer {
  std::string name;
  Eigen::Index in = 0;
  Eigen::Index out = 0;

  struct Bound {
    Var w, b;
    Var operator()(Var x) const { return dense(x, w, b); }
  };

  void declare(ParameterStore& store, Rng& rng) const {
    if (in <= 0 || out <= 0) throw ConfigError("dense layer " + name + ": non-positive dimension");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    init_uniform(store.add(name + ".w", out, in).value, bound, rng);
    init_uniform(store.add(name + ".b", 1, out).value, bound, rng);
  }

  Bound bind(Graph& g, ParameterStore& store) const {
    return {g.parameter(store.at(name + ".w")), g.parameter(store.at(name + ".b"))};
  }
};

/// GRU cell `name.w_in` (3H×D), `name.w_hid` (3H×H), `name.b_in`, `name.b_hid` (1×3H).
struct GruLayer {
  std::string name;
  Eigen::Index in = 0;
  Eigen::Index hidden = 0;

  struct Bound {
    Var w_in, w_hid, b_in, b_hid;
    Var operator()(Var x, Var h) const { return gru_cell(x, h, w_in, w_hid, b_in, b_hid); }
  };

  void declare(ParameterStore& store, Rng& rng) const {
    if (in <= 0 || hidden <= 0) throw ConfigError("gru layer " + name + ": non-positive dimension");
    const double in_bound = 1.0 / std::sqrt(static_cast<double>(in));
    const double hid_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    init_uniform(store.add(name + ".w_in", 3 * hidden, in).value, in_bound, rng);
    init_uniform(store.add(name + ".w_hid", 3 * hidden, hidden).value, hid_bound, rng);
    init_uniform(store.add(name + ".b_in", 1, 3 * hidden).value, hid_bound, rng);
    init_uniform(store.add(name + ".b_hid", 1, 3 * hidden).value, hid_bound, rng);
  }

  Bound bind(Graph& g, ParameterStore& store) const {
    return {g.parameter(store.at(name + ".w_in")), g.parameter(store.at(name + ".w_hid")),
            g.parameter(store.at(name + ".b_in")), g.parameter(store.at(name + ".b_hid"))};
  }
};

}  // namespace optmarl::diffcore
