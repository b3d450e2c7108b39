#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "optmarl/envs/matrix_game.hpp"
#include "optmarl/envs/predprey.hpp"
#include "optmarl/exploration/policy.hpp"
#include "optmarl/kvfile.hpp"
#include "optmarl/networks/bundle.hpp"
#include "optmarl/training/episode.hpp"
#include "optmarl/training/learner.hpp"
#include "optmarl/training/replay.hpp"
#include "optmarl/training/run_config.hpp"

namespace optmarl::training {

using Rng = std::mt19937_64;

/// Independent generator for one purpose of one run.
inline Rng make_stream(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream, 0x6f707421u};
  return Rng(seq);
}

enum Stream : std::uint32_t { kInitStream = 0, kEnvStream = 1, kActStream = 2, kReplayStream = 3, kEvalStream = 4 };

inline std::unique_ptr<envs::Environment> make_environment(const RunConfig& cfg) {
  if (cfg.env == "matrix") return std::make_unique<envs::MatrixGame>();
  if (cfg.env == "predprey") {
    return std::make_unique<envs::PredatorPrey>(cfg.env_config.empty() ? envs::PredPreyConfig{}
                                                                       : envs::PredPreyConfig::load(cfg.env_config));
  }
  throw ConfigError("env: unknown environment '" + cfg.env + "'");
}

inline networks::BundleSpec bundle_spec(const RunConfig& cfg, const envs::Environment& env) {
  networks::BundleSpec spec;
  spec.n_agents = env.n_agents();
  spec.n_actions = env.n_actions();
  spec.obs_dim = env.obs_dim();
  spec.state_dim = env.state_dim();
  spec.hidden = cfg.hidden;
  spec.embed = cfg.embed;
  spec.critic_feature = cfg.critic_feature;
  spec.algo = cfg.algorithm();
  return spec;
}

enum class ActMode { Greedy, EpsilonGreedy, OptimisticEpsilonGreedy };

struct ActParams {
  ActMode mode = ActMode::Greedy;
  double epsilon = 0.0;
  bool normalize = false;
  double cap = 0.0;
};

struct EpisodeResult {
  EpisodeRecord record;  // empty unless recording was requested
  double episode_return = 0.0;
  bool success = false;
  int length = 0;
};

inline std::vector<std::vector<std::uint8_t>> all_masks(const envs::Environment& env) {
  std::vector<std::vector<std::uint8_t>> out;
  for (int i = 0; i < env.n_agents(); ++i) out.push_back(env.action_mask(i));
  return out;
}

/// Plays one episode with the live networks.
inline EpisodeResult play_episode(envs::Environment& env, AgentNetBundle& bundle, const ActParams& act, Rng& rng,
                                  std::uint64_t env_seed, bool record) {
  const int n = env.n_agents();
  const int A = env.n_actions();
  networks::RecurrentActor agent(bundle.agent(), n);
  std::unique_ptr<networks::RecurrentActor> opt;
  if (act.mode == ActMode::OptimisticEpsilonGreedy) {
    if (!bundle.has_opt()) throw UsageError("optimistic exploration requires the optimistic network");
    opt = std::make_unique<networks::RecurrentActor>(bundle.opt(), n);
  }

  EpisodeResult result;
  EpisodeBuilder builder(n, A);
  envs::EnvState state = env.reset(env_seed);
  auto masks = all_masks(env);
  if (record) builder.begin(state, masks);

  while (!state.done) {
    const Matrix q = agent.step(bundle.live(), bundle.agent_inputs(state.obs));
    Matrix f;
    if (opt) f = opt->step(bundle.live(), bundle.opt_inputs(state.state, state.obs));
    envs::JointAction joint(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const Eigen::RowVectorXd qi = q.row(i);
      const std::span<const double> qs(qi.data(), static_cast<std::size_t>(A));
      const exploration::Mask mask(masks[static_cast<std::size_t>(i)]);
      int a = 0;
      switch (act.mode) {
        case ActMode::Greedy: a = exploration::argmax(qs, mask); break;
        case ActMode::EpsilonGreedy:
          a = exploration::sample(exploration::epsilon_greedy_dist(qs, act.epsilon, mask), rng);
          break;
        case ActMode::OptimisticEpsilonGreedy: {
          const Eigen::RowVectorXd fi = f.row(i);
          std::vector<double> fv(fi.data(), fi.data() + A);
          if (act.normalize) fv = exploration::normalize_opt(fv, act.cap);
          a = exploration::sample(exploration::optimistic_epsilon_greedy_dist(qs, fv, act.epsilon, mask), rng);
          break;
        }
      }
      joint[static_cast<std::size_t>(i)] = a;
    }
    envs::StepOutcome out = env.step(joint);
    result.episode_return += out.reward;
    ++result.length;
    state = std::move(out.next);
    masks = all_masks(env);
    if (record) {
      builder.add_step(joint, out.reward, state, masks, out.done, out.done && env.terminated());
    }
  }
  result.success = env.succeeded();
  if (record) result.record = builder.finish();
  return result;
}

/// Q_tot for every joint action at the first step of a two-agent episode
/// (rows: agent 0 action, columns: agent 1 action).
inline Matrix joint_value_table(envs::Environment& env, AgentNetBundle& bundle) {
  if (env.n_agents() != 2) throw UsageError("joint value table needs exactly two agents");
  const envs::EnvState& s = env.reset(0);
  const Matrix hidden = Matrix::Zero(2, bundle.agent().hidden_dim());
  const auto [q, next] = networks::agent_forward(bundle.agent(), bundle.live(), bundle.agent_inputs(s.obs), hidden);
  const int A = env.n_actions();
  Matrix table(A, A);
  for (int a = 0; a < A; ++a)
    for (int b = 0; b < A; ++b) {
      const double pair[2] = {q(0, a), q(1, b)};
      table(a, b) = networks::mix_value(bundle.mixer(), bundle.live(), pair, s.state);
    }
  return table;
}

struct MetricsRow {
  long long step = 0;
  long long episode = 0;
  double eval_mean_return = 0.0;
  double eval_win_or_optimal_rate = 0.0;
  double l_td = 0.0;
  double l_opt = 0.0;
  double l_jt = 0.0;
  double epsilon = 0.0;
  double optnorm_cap = 0.0;
};

inline const char* metrics_header() {
  return "step,episode,eval_mean_return,eval_win_or_optimal_rate,L_td,L_opt,L_jt,epsilon,optnorm_cap";
}

inline std::string format_metrics_row(const MetricsRow& r) {
  const auto d = kv::format_double;
  std::ostringstream out;
  out << r.step << ',' << r.episode << ',' << d(r.eval_mean_return) << ',' << d(r.eval_win_or_optimal_rate) << ','
      << d(r.l_td) << ',' << d(r.l_opt) << ',' << d(r.l_jt) << ',' << d(r.epsilon) << ',' << d(r.optnorm_cap);
  return out.str();
}

/// One seeded experiment: alternate episode rollouts and optimizer steps,
/// sync targets periodically and emit a greedy evaluation row every
/// eval_interval environment steps (plus one at step 0 and one at the end).
class TrainingRun {
 public:
  explicit TrainingRun(RunConfig cfg)
      : cfg_(std::move(cfg)),
        env_((cfg_.validate(), make_environment(cfg_))),
        eval_env_(make_environment(cfg_)),
        bundle_(bundle_spec(cfg_, *env_), make_stream(cfg_.seed, kInitStream)()),
        learner_(bundle_, cfg_.train),
        buffer_(static_cast<std::size_t>(cfg_.buffer)),
        env_rng_(make_stream(cfg_.seed, kEnvStream)),
        act_rng_(make_stream(cfg_.seed, kActStream)),
        replay_rng_(make_stream(cfg_.seed, kReplayStream)) {
    Rng eval_rng = make_stream(cfg_.seed, kEvalStream);
    for (int k = 0; k < cfg_.eval_episodes; ++k) eval_seeds_.push_back(eval_rng());
  }

  const RunConfig& config() const { return cfg_; }
  AgentNetBundle& bundle() { return bundle_; }
  const Learner& learner() const { return learner_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  envs::Environment& environment() { return *env_; }

  double epsilon_at(long long t) const { return exploration::anneal({cfg_.eps_start, cfg_.eps_end, cfg_.eps_horizon}, t); }
  double cap_at(long long t) const {
    if (!cfg_.optnorm || !bundle_.has_opt()) return 0.0;
    return exploration::anneal({0.0, cfg_.optnorm_cap_end, cfg_.optnorm_horizon}, t);
  }

  /// Greedy evaluation over the fixed evaluation seeds: (mean return, success rate).
  std::pair<double, double> evaluate() {
    double total = 0.0;
    int wins = 0;
    Rng unused(0);
    for (std::uint64_t s : eval_seeds_) {
      EpisodeResult r = play_episode(*eval_env_, bundle_, {ActMode::Greedy}, unused, s, false);
      total += r.episode_return;
      wins += r.success ? 1 : 0;
    }
    const double n = static_cast<double>(eval_seeds_.size());
    return {total / n, wins / n};
  }

  std::vector<MetricsRow> run(const std::function<void(const MetricsRow&)>& on_row = {}) {
    std::vector<MetricsRow> rows;
    const ActMode explore =
        bundle_.has_opt() ? ActMode::OptimisticEpsilonGreedy : ActMode::EpsilonGreedy;
    long long next_eval = 0;
    LossReport loss_sum;
    int loss_count = 0;

    const auto emit = [&] {
      MetricsRow row;
      row.step = env_steps_;
      row.episode = episodes_;
      std::tie(row.eval_mean_return, row.eval_win_or_optimal_rate) = evaluate();
      if (loss_count > 0) {
        row.l_td = loss_sum.td / loss_count;
        row.l_opt = loss_sum.opt / loss_count;
        row.l_jt = loss_sum.jt / loss_count;
      }
      row.epsilon = epsilon_at(env_steps_);
      row.optnorm_cap = cap_at(env_steps_);
      loss_sum = {};
      loss_count = 0;
      rows.push_back(row);
      if (on_row) on_row(row);
    };

    while (env_steps_ < cfg_.steps) {
      if (env_steps_ >= next_eval) {
        emit();
        next_eval += cfg_.eval_interval;
      }
      const ActParams act{explore, epsilon_at(env_steps_), cfg_.optnorm, cap_at(env_steps_)};
      EpisodeResult ep = play_episode(*env_, bundle_, act, act_rng_, env_rng_(), true);
      env_steps_ += ep.length;
      ++episodes_;
      buffer_.insert(std::move(ep.record));
      if (buffer_.size() >= static_cast<std::size_t>(cfg_.train.batch) &&
          episodes_ % cfg_.train.train_interval == 0) {
        const LossReport r = learner_.train(buffer_.sample(static_cast<std::size_t>(cfg_.train.batch), replay_rng_));
        loss_sum.td += r.td;
        loss_sum.opt += r.opt;
        loss_sum.jt += r.jt;
        ++loss_count;
      }
    }
    emit();
    return rows;
  }

  long long env_steps() const { return env_steps_; }
  long long episodes() const { return episodes_; }

 private:
  RunConfig cfg_;
  std::unique_ptr<envs::Environment> env_;
  std::unique_ptr<envs::Environment> eval_env_;
  AgentNetBundle bundle_;
  Learner learner_;
  ReplayBuffer buffer_;
  Rng env_rng_;
  Rng act_rng_;
  Rng replay_rng_;
  std::vector<std::uint64_t> eval_seeds_;
  long long env_steps_ = 0;
  long long episodes_ = 0;
};

/// Runs one experiment to completion and returns its metrics rows.
inline std::vector<MetricsRow> train_run(const RunConfig& cfg) {
  TrainingRun run(cfg);
  return run.run();
}

}  // namespace optmarl::training
