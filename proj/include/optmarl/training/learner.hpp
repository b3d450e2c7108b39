#pragma once

// One optimizer step of value-decomposition Q-learning on a batch of
// episodes. The bootstrap target is built in a separate gradient-free graph
// from the frozen target copies:
//
//   â*_{t+1} = per-agent argmax of the target agent utilities at t+1
//   y = r + γ·Q_jt⁻(s_{t+1}, o_{t+1}, â*_{t+1})        (opt-qmix)
//   y = r + γ·Q_tot⁻(s_{t+1}, â*_{t+1})                 (vdn, qmix)
//
// with y = r on terminal steps. The live losses are
//
//   L_td  = mean (Q_tot − y)²
//   L_opt = mean w̃ (f_tot − y)²,  w̃ = 1 if y > f_tot else w
//   L_jt  = mean (Q_jt − y)²
//
// over the filled steps of the batch; vdn/qmix minimise L_td alone.

#include <string>
#include <vector>

#include "optmarl/diffcore/rmsprop.hpp"
#include "optmarl/exploration/policy.hpp"
#include "optmarl/networks/bundle.hpp"
#include "optmarl/training/episode.hpp"

namespace optmarl::training {

using diffcore::Graph;
using diffcore::Matrix;
using diffcore::Var;
using networks::AgentNetBundle;
using networks::Algo;

struct TrainConfig {
  double gamma = 0.99;
  double lr = 5e-4;
  int batch = 32;
  double w = 0.01;
  int target_sync = 200;
  int train_interval = 1;
  double grad_clip = 10.0;
  double rms_decay = 0.99;
  double rms_eps = 1e-5;

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
    if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("w must lie in [0, 1]");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (batch <= 0) throw ConfigError("batch must be positive");
    if (target_sync <= 0) throw ConfigError("target_sync must be positive");
    if (train_interval <= 0) throw ConfigError("train_interval must be positive");
    if (!(grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
    if (!(rms_decay >= 0.0 && rms_decay < 1.0)) throw ConfigError("rms_decay must lie in [0, 1)");
    if (!(rms_eps > 0.0)) throw ConfigError("rms_eps must be positive");
  }
};

struct LossReport {
  double td = 0.0;
  double opt = 0.0;
  double jt = 0.0;
  double total = 0.0;
  double mean_q_tot = 0.0;
  double mean_f_tot = 0.0;
  double mean_q_jt = 0.0;
};

/// Episodes padded to a common length and laid out step-major: batch row
/// (t, b) is t·B + b and agent row (t, b, i) is (t·B + b)·n + i.
struct Batch {
  int episodes = 0;  // B
  int steps = 0;     // T, the longest episode
  int agents = 0;
  int actions = 0;
  int obs_dim = 0;
  Matrix agent_in;   // (T+1)·B·n × (O + n)
  Matrix opt_in;     // T·B·n × (S + O + n), opt-qmix only
  Matrix critic_in;  // T·B·n × (O + A + n), opt-qmix only
  Matrix states;     // (T+1)·B × S
  std::vector<int> chosen;  // T·B·n
  Matrix reward;     // T·B × 1
  Matrix filled;     // T·B × 1
  Matrix terminal;   // T·B × 1
  std::vector<std::uint8_t> masks;  // (T+1)·B·n·A

  Eigen::Index batch_row(int t, int b) const { return static_cast<Eigen::Index>(t) * episodes + b; }
  Eigen::Index agent_row(int t, int b, int i) const { return batch_row(t, b) * agents + i; }
  bool allowed(int t, int b, int i, int a) const {
    return masks[static_cast<std::size_t>(agent_row(t, b, i) * actions + a)] != 0;
  }
};

inline Batch make_batch(const std::vector<const EpisodeRecord*>& episodes, const AgentNetBundle& bundle) {
  if (episodes.empty()) throw UsageError("make_batch: no episodes");
  const auto& spec = bundle.spec();
  Batch batch;
  batch.episodes = static_cast<int>(episodes.size());
  batch.agents = spec.n_agents;
  batch.actions = spec.n_actions;
  batch.obs_dim = spec.obs_dim;
  for (const EpisodeRecord* ep : episodes) {
    if (ep->n_agents != spec.n_agents || ep->n_actions != spec.n_actions || ep->obs.cols() != spec.obs_dim ||
        ep->states.cols() != spec.state_dim)
      throw ConfigError("make_batch: episode does not match the network layout");
    batch.steps = std::max(batch.steps, ep->length());
  }
  const int B = batch.episodes, T = batch.steps, n = batch.agents, A = batch.actions;
  const int O = spec.obs_dim, S = spec.state_dim;
  const bool opt = bundle.has_opt();

  batch.agent_in = Matrix::Zero(static_cast<Eigen::Index>(T + 1) * B * n, O + n);
  batch.states = Matrix::Zero(static_cast<Eigen::Index>(T + 1) * B, S);
  batch.chosen.assign(static_cast<std::size_t>(T) * B * n, 0);
  batch.reward = Matrix::Zero(static_cast<Eigen::Index>(T) * B, 1);
  batch.filled = Matrix::Zero(static_cast<Eigen::Index>(T) * B, 1);
  batch.terminal = Matrix::Zero(static_cast<Eigen::Index>(T) * B, 1);
  batch.masks.assign(static_cast<std::size_t>(T + 1) * B * n * A, 1);
  if (opt) {
    batch.opt_in = Matrix::Zero(static_cast<Eigen::Index>(T) * B * n, S + O + n);
    batch.critic_in = Matrix::Zero(static_cast<Eigen::Index>(T) * B * n, O + A + n);
  }

  for (int b = 0; b < B; ++b) {
    const EpisodeRecord& ep = *episodes[static_cast<std::size_t>(b)];
    const int len = ep.length();
    for (int t = 0; t <= T; ++t) {
      for (int i = 0; i < n; ++i) {
        const Eigen::Index row = batch.agent_row(t, b, i);
        batch.agent_in(row, O + i) = 1.0;
        if (t <= len) {
          batch.agent_in.row(row).head(O) = ep.obs.row(t * n + i).cast<double>();
          for (int a = 0; a < A; ++a)
            batch.masks[static_cast<std::size_t>(row * A + a)] = ep.allowed(t, i, a) ? 1 : 0;
        }
        if (t < T && opt) {
          batch.opt_in(row, S + O + i) = 1.0;
          batch.critic_in(row, O + A + i) = 1.0;
        }
        if (t < len) {
          const int a = ep.action(t, i);
          batch.chosen[static_cast<std::size_t>(row)] = a;
          if (opt) {
            batch.opt_in.row(row).head(S) = ep.states.row(t).cast<double>();
            batch.opt_in.row(row).segment(S, O) = ep.obs.row(t * n + i).cast<double>();
            batch.critic_in.row(row).head(O) = ep.obs.row(t * n + i).cast<double>();
            batch.critic_in(row, O + a) = 1.0;
          }
        }
      }
      if (t <= len) batch.states.row(batch.batch_row(t, b)) = ep.states.row(t).cast<double>();
      if (t < len) {
        const Eigen::Index r = batch.batch_row(t, b);
        batch.reward(r, 0) = ep.rewards[static_cast<std::size_t>(t)];
        batch.filled(r, 0) = 1.0;
        batch.terminal(r, 0) = ep.terminal[static_cast<std::size_t>(t)];
      }
    }
  }
  return batch;
}

/// Per-agent greedy actions of the target agent network at every next step:
/// entry (t, b, i) holds â*_{t+1}.
inline std::vector<int> greedy_next_actions(const Batch& batch, const Matrix& q_all) {
  const int B = batch.episodes, T = batch.steps, n = batch.agents, A = batch.actions;
  std::vector<int> out(static_cast<std::size_t>(T) * B * n, 0);
  for (int t = 0; t < T; ++t)
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < n; ++i) {
        const Eigen::Index row = batch.agent_row(t + 1, b, i);
        int best = -1;
        for (int a = 0; a < A; ++a) {
          if (!batch.allowed(t + 1, b, i, a)) continue;
          if (best < 0 || q_all(row, a) > q_all(row, best)) best = a;
        }
        out[static_cast<std::size_t>(batch.agent_row(t, b, i))] = best < 0 ? 0 : best;
      }
  return out;
}

/// Bootstrap targets y (T·B × 1), computed without gradient tracking.
inline Matrix compute_targets(const Batch& batch, AgentNetBundle& bundle, double gamma) {
  const int B = batch.episodes, T = batch.steps, n = batch.agents;
  const Eigen::Index step_rows = static_cast<Eigen::Index>(B) * n;
  Graph g(false);
  auto& target = bundle.target();
  const auto agent = bundle.agent().bind(g, target);
  const auto seq = bundle.agent().unroll(g, agent, g.constant(batch.agent_in), step_rows);
  const std::vector<int> next_greedy = greedy_next_actions(batch, seq.outputs.value());
  Var next_states = g.constant(batch.states.bottomRows(static_cast<Eigen::Index>(T) * B));

  Matrix next_value;
  if (!bundle.has_opt()) {
    const Matrix& q_all = seq.outputs.value();
    Matrix q_next(static_cast<Eigen::Index>(T) * B, n);
    for (int t = 0; t < T; ++t)
      for (int b = 0; b < B; ++b)
        for (int i = 0; i < n; ++i)
          q_next(batch.batch_row(t, b), i) =
              q_all(batch.agent_row(t + 1, b, i), next_greedy[static_cast<std::size_t>(batch.agent_row(t, b, i))]);
    next_value = bundle.mixer().mix(g, target, g.constant(q_next), next_states).value();
  } else {
    const auto& critic = bundle.critic();
    const auto features = critic.features().bind(g, target);
    const auto history = critic.features().unroll(g, features, g.constant(batch.critic_in), step_rows);
    // Branch one step off the observed history with the greedy next actions.
    const int O = batch.obs_dim, A = batch.actions;
    Matrix branch_in = Matrix::Zero(static_cast<Eigen::Index>(T) * B * n, O + A + n);
    for (int t = 0; t < T; ++t)
      for (int b = 0; b < B; ++b)
        for (int i = 0; i < n; ++i) {
          const Eigen::Index row = batch.agent_row(t, b, i);
          branch_in.row(row).head(O) = batch.agent_in.row(batch.agent_row(t + 1, b, i)).head(O);
          branch_in(row, O + next_greedy[static_cast<std::size_t>(row)]) = 1.0;
          branch_in(row, O + A + i) = 1.0;
        }
    Var prev_hidden = diffcore::concat_rows(history.hidden);
    auto [branch_features, unused] = features.step(g.constant(branch_in), prev_hidden);
    next_value = critic.head(g, target, branch_features, next_states).value();
  }

  Matrix y = batch.reward;
  y.array() += gamma * (1.0 - batch.terminal.array()) * next_value.array();
  return y;
}

struct LossVars {
  Var td;
  Var opt;
  Var jt;
  Var total;
  LossReport report;
};

/// Builds the live losses on `g` against constant targets `y`.
inline LossVars compute_losses(Graph& g, const Batch& batch, AgentNetBundle& bundle, const Matrix& y, double w) {
  const int B = batch.episodes, T = batch.steps, n = batch.agents;
  const Eigen::Index rows = static_cast<Eigen::Index>(T) * B;
  const Eigen::Index step_rows = static_cast<Eigen::Index>(B) * n;
  if (y.rows() != rows || y.cols() != 1) throw UsageError("compute_losses: target shape mismatch");
  auto& live = bundle.live();
  const Matrix ones = Matrix::Ones(rows, 1);
  const double filled = batch.filled.sum();
  const auto masked_mean = [&](const Matrix& v) {
    return filled > 0 ? (v.array() * batch.filled.array()).sum() / filled : 0.0;
  };

  Var states = g.constant(batch.states.topRows(rows));
  const auto agent = bundle.agent().bind(g, live);
  const auto q_seq = bundle.agent().unroll(g, agent, g.constant(batch.agent_in.topRows(rows * n)), step_rows);
  Var q_chosen = diffcore::fold_rows(diffcore::gather_cols(q_seq.outputs, batch.chosen), n);
  Var q_tot = bundle.mixer().mix(g, live, q_chosen, states);

  LossVars out;
  out.td = diffcore::weighted_mse(q_tot, y, ones, batch.filled);
  out.total = out.td;
  out.report.mean_q_tot = masked_mean(q_tot.value());

  if (bundle.has_opt()) {
    const auto opt = bundle.opt().bind(g, live);
    const auto f_seq = bundle.opt().unroll(g, opt, g.constant(batch.opt_in), step_rows);
    Var f_tot = networks::f_total(diffcore::fold_rows(diffcore::gather_cols(f_seq.outputs, batch.chosen), n));
    Matrix weight(rows, 1);
    for (Eigen::Index r = 0; r < rows; ++r) weight(r, 0) = y(r, 0) > f_tot.value()(r, 0) ? 1.0 : w;
    out.opt = diffcore::weighted_mse(f_tot, y, weight, batch.filled);

    const auto& critic = bundle.critic();
    const auto features = critic.features().bind(g, live);
    const auto c_seq = critic.features().unroll(g, features, g.constant(batch.critic_in), step_rows);
    Var q_jt = critic.head(g, live, c_seq.outputs, states);
    out.jt = diffcore::weighted_mse(q_jt, y, ones, batch.filled);

    out.total = diffcore::add(diffcore::add(out.td, out.opt), out.jt);
    out.report.opt = out.opt.scalar();
    out.report.jt = out.jt.scalar();
    out.report.mean_f_tot = masked_mean(f_tot.value());
    out.report.mean_q_jt = masked_mean(q_jt.value());
  }
  out.report.td = out.td.scalar();
  out.report.total = out.total.scalar();
  return out;
}

/// Owns the optimizer schedule of one bundle.
class Learner {
 public:
  Learner(AgentNetBundle& bundle, TrainConfig cfg) : bundle_(&bundle), cfg_(cfg) { cfg_.validate(); }

  const TrainConfig& config() const { return cfg_; }
  long long steps() const { return steps_; }

  LossReport train(const std::vector<const EpisodeRecord*>& episodes) {
    const Batch batch = make_batch(episodes, *bundle_);
    const Matrix y = compute_targets(batch, *bundle_, cfg_.gamma);
    Graph g;
    LossVars losses = compute_losses(g, batch, *bundle_, y, cfg_.w);
    g.backward(losses.total);
    auto& live = bundle_->live();
    diffcore::clip_grad_norm(live, cfg_.grad_clip, {"agent.", "mixer."});
    if (bundle_->has_opt()) {
      diffcore::clip_grad_norm(live, cfg_.grad_clip, {"opt."});
      diffcore::clip_grad_norm(live, cfg_.grad_clip, {"critic."});
    }
    diffcore::rmsprop_step(live, {cfg_.lr, cfg_.rms_decay, cfg_.rms_eps});
    ++steps_;
    if (steps_ % cfg_.target_sync == 0) bundle_->sync_targets();
    return losses.report;
  }

 private:
  AgentNetBundle* bundle_;
  TrainConfig cfg_;
  long long steps_ = 0;
};

}  // namespace optmarl::training
