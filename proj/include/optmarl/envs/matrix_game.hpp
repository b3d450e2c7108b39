#pragma once

#include <array>
#include <string>

#include "optmarl/envs/env.hpp"
#include "optmarl/errors.hpp"

namespace optmarl::envs {

/// Two-agent, three-action, one-step cooperative game with a punished
/// optimum: (a1,a1) pays 8, any miscoordination with a1 pays -12, and the
/// remaining block pays 0.
class MatrixGame final : public Environment {
 public:
  static constexpr int kAgents = 2;
  static constexpr int kActions = 3;
  static constexpr std::array<std::array<double, 3>, 3> kPayoff{{
      {8.0, -12.0, -12.0},
      {-12.0, 0.0, 0.0},
      {-12.0, 0.0, 0.0},
  }};

  static double payoff(int a0, int a1) {
    if (a0 < 0 || a0 >= kActions || a1 < 0 || a1 >= kActions) throw UsageError("matrix game: action out of range");
    return kPayoff[static_cast<std::size_t>(a0)][static_cast<std::size_t>(a1)];
  }

  MatrixGame() { reset(0); }

  std::string name() const override { return "matrix"; }
  int n_agents() const override { return kAgents; }
  int n_actions() const override { return kActions; }
  int obs_dim() const override { return 1; }
  int state_dim() const override { return 1; }
  int horizon() const override { return 1; }

  const EnvState& reset(std::uint64_t /*seed*/) override {
    state_ = initial_state();
    last_reward_ = 0.0;
    return state_;
  }

  StepOutcome step(const JointAction& actions) override {
    if (static_cast<int>(actions.size()) != kAgents)
      throw ConfigError("matrix game expects 2 agents, got " + std::to_string(actions.size()));
    if (state_.done) throw UsageError("matrix game: step after episode end");
    last_reward_ = payoff(actions[0], actions[1]);
    state_.step = 1;
    state_.done = true;
    return {last_reward_, state_, true};
  }

  const EnvState& current() const override { return state_; }
  bool terminated() const override { return state_.done; }
  bool succeeded() const override { return state_.done && last_reward_ == kPayoff[0][0]; }

 private:
  static EnvState initial_state() {
    EnvState s;
    s.state = Vector::Ones(1);
    s.obs.assign(kAgents, Vector::Ones(1));
    return s;
  }

  EnvState state_;
  double last_reward_ = 0.0;
};

}  // namespace optmarl::envs
