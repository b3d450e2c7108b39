#pragma once

#include <numeric>
#include <span>
#include <string>

#include "optmarl/diffcore/layers.hpp"
#include "optmarl/errors.hpp"

namespace optmarl::networks {

using diffcore::Graph;
using diffcore::Matrix;
using diffcore::ParameterStore;
using diffcore::Rng;
using diffcore::Var;

enum class MixerKind { Vdn, Qmix };

/// Aggregates per-agent utilities (B×n) into Q_tot (B×1).
///
/// VDN sums. QMIX mixes with state-conditioned weights made nonnegative by
/// absolute value, which keeps ∂Q_tot/∂q_i ≥ 0:
///   hidden = elu(q·|W1(s)| + b1(s)),  Q_tot = hidden·|W2(s)| + V(s)
/// where W1 is n×E, b1 and W2 have E entries and V is a two-layer net.
class Mixer {
 public:
  Mixer() = default;
  Mixer(MixerKind kind, Eigen::Index n_agents, Eigen::Index state_dim, Eigen::Index embed,
        std::string prefix = "mixer")
      : kind_(kind),
        n_agents_(n_agents),
        state_dim_(state_dim),
        embed_(embed),
        hyper_w1_{prefix + ".hyper_w1", state_dim, n_agents * embed},
        hyper_b1_{prefix + ".hyper_b1", state_dim, embed},
        hyper_w2_{prefix + ".hyper_w2", state_dim, embed},
        value_in_{prefix + ".value_in", state_dim, embed},
        value_out_{prefix + ".value_out", embed, 1} {
    if (n_agents < 1) throw ConfigError("mixer needs at least one agent");
  }

  MixerKind kind() const { return kind_; }
  Eigen::Index embed() const { return embed_; }

  void declare(ParameterStore& store, Rng& rng) const {
    if (kind_ == MixerKind::Vdn) return;
    hyper_w1_.declare(store, rng);
    hyper_b1_.declare(store, rng);
    hyper_w2_.declare(store, rng);
    value_in_.declare(store, rng);
    value_out_.declare(store, rng);
  }

  Var mix(Graph& g, ParameterStore& store, Var q, Var state) const {
    if (q.cols() != n_agents_)
      throw ConfigError("mixer: expected " + std::to_string(n_agents_) + " utilities, got " + std::to_string(q.cols()));
    if (kind_ == MixerKind::Vdn) return diffcore::row_sum(q);
    if (state.cols() != state_dim_ || state.rows() != q.rows()) throw ConfigError("mixer: state shape mismatch");
    Var w1 = diffcore::abs(hyper_w1_.bind(g, store)(state));
    Var b1 = hyper_b1_.bind(g, store)(state);
    Var hidden = diffcore::elu(diffcore::add(diffcore::rowwise_mix(q, w1, embed_), b1));
    Var w2 = diffcore::abs(hyper_w2_.bind(g, store)(state));
    Var v = value_out_.bind(g, store)(diffcore::relu(value_in_.bind(g, store)(state)));
    return diffcore::add(diffcore::row_sum(diffcore::mul(hidden, w2)), v);
  }

 private:
  MixerKind kind_ = MixerKind::Vdn;
  Eigen::Index n_agents_ = 0;
  Eigen::Index state_dim_ = 0;
  Eigen::Index embed_ = 0;
  diffcore::DenseLayer hyper_w1_;
  diffcore::DenseLayer hyper_b1_;
  diffcore::DenseLayer hyper_w2_;
  diffcore::DenseLayer value_in_;
  diffcore::DenseLayer value_out_;
};

/// Evaluates Q_tot for one state without recording gradients.
inline double mix_value(const Mixer& mixer, ParameterStore& store, std::span<const double> q,
                        const Eigen::VectorXd& state) {
  Graph g(false);
  Matrix qm(1, static_cast<Eigen::Index>(q.size()));
  for (std::size_t i = 0; i < q.size(); ++i) qm(0, static_cast<Eigen::Index>(i)) = q[i];
  return mixer.mix(g, store, g.constant(qm), g.constant(state.transpose())).scalar();
}

/// f_tot: sum of per-agent optimistic estimates, row by row (B×n → B×1).
inline Var f_total(Var f) { return diffcore::row_sum(f); }

inline double f_total(std::span<const double> f) { return std::accumulate(f.begin(), f.end(), 0.0); }

}  // namespace optmarl::networks
