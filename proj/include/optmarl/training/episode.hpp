#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "optmarl/envs/env.hpp"
#include "optmarl/errors.hpp"

namespace optmarl::training {

/// One stored trajectory of T steps. States, observations and action masks
/// have T+1 entries (the last one is the post-terminal view); actions,
/// rewards and flags have T. `done` marks the final step; `terminal` marks a
/// true end of the task (no bootstrapping), as opposed to a horizon cutoff.
///
/// Observations and states are stored in single precision to bound replay
/// memory; the environments here emit exactly representable values.
struct EpisodeRecord {
  int n_agents = 0;
  int n_actions = 0;
  Eigen::MatrixXf states;            // (T+1) × S
  Eigen::MatrixXf obs;               // (T+1)·n × O, row t·n + i
  std::vector<int> actions;          // T·n
  std::vector<double> rewards;       // T
  std::vector<std::uint8_t> done;    // T
  std::vector<std::uint8_t> terminal;  // T
  std::vector<std::uint8_t> masks;   // (T+1)·n·A

  int length() const { return static_cast<int>(rewards.size()); }

  double episode_return() const {
    double r = 0.0;
    for (double v : rewards) r += v;
    return r;
  }

  int action(int t, int agent) const { return actions[static_cast<std::size_t>(t * n_agents + agent)]; }

  bool allowed(int t, int agent, int a) const {
    return masks[static_cast<std::size_t>((t * n_agents + agent) * n_actions + a)] != 0;
  }

  void validate() const {
    const int T = length();
    if (T <= 0) throw UsageError("episode has no steps");
    if (states.rows() != T + 1 || obs.rows() != (T + 1) * n_agents ||
        static_cast<int>(actions.size()) != T * n_agents || static_cast<int>(done.size()) != T ||
        static_cast<int>(terminal.size()) != T ||
        static_cast<int>(masks.size()) != (T + 1) * n_agents * n_actions)
      throw UsageError("episode sequences have inconsistent lengths");
    for (int t = 0; t < T; ++t)
      if ((done[static_cast<std::size_t>(t)] != 0) != (t == T - 1))
        throw UsageError("episode must have exactly one final step");
  }
};

/// Accumulates an episode while it is being played.
class EpisodeBuilder {
 public:
  EpisodeBuilder(int n_agents, int n_actions) : n_agents_(n_agents), n_actions_(n_actions) {}

  void begin(const envs::EnvState& s, const std::vector<std::vector<std::uint8_t>>& masks) {
    states_.clear();
    obs_.clear();
    ep_ = EpisodeRecord{};
    ep_.n_agents = n_agents_;
    ep_.n_actions = n_actions_;
    push_view(s, masks);
  }

  void add_step(const envs::JointAction& a, double reward, const envs::EnvState& next,
                const std::vector<std::vector<std::uint8_t>>& next_masks, bool done, bool terminal) {
    if (static_cast<int>(a.size()) != n_agents_) throw UsageError("episode builder: wrong joint action size");
    ep_.actions.insert(ep_.actions.end(), a.begin(), a.end());
    ep_.rewards.push_back(reward);
    ep_.done.push_back(done ? 1 : 0);
    ep_.terminal.push_back(terminal ? 1 : 0);
    push_view(next, next_masks);
  }

  EpisodeRecord finish() {
    const int rows = static_cast<int>(states_.size());
    const int sdim = static_cast<int>(states_.front().size());
    const int odim = static_cast<int>(obs_.front().size());
    ep_.states.resize(rows, sdim);
    for (int t = 0; t < rows; ++t) ep_.states.row(t) = states_[static_cast<std::size_t>(t)].cast<float>().transpose();
    ep_.obs.resize(static_cast<Eigen::Index>(obs_.size()), odim);
    for (std::size_t r = 0; r < obs_.size(); ++r)
      ep_.obs.row(static_cast<Eigen::Index>(r)) = obs_[r].cast<float>().transpose();
    ep_.validate();
    return std::move(ep_);
  }

 private:
  void push_view(const envs::EnvState& s, const std::vector<std::vector<std::uint8_t>>& masks) {
    if (static_cast<int>(s.obs.size()) != n_agents_ || static_cast<int>(masks.size()) != n_agents_)
      throw UsageError("episode builder: wrong agent count");
    states_.push_back(s.state);
    for (const auto& o : s.obs) obs_.push_back(o);
    for (const auto& m : masks) {
      if (static_cast<int>(m.size()) != n_actions_) throw UsageError("episode builder: wrong mask size");
      ep_.masks.insert(ep_.masks.end(), m.begin(), m.end());
    }
  }

  int n_agents_;
  int n_actions_;
  std::vector<Eigen::VectorXd> states_;
  std::vector<Eigen::VectorXd> obs_;
  EpisodeRecord ep_;
};

}  // namespace optmarl::training
