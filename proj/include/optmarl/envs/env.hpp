#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace optmarl::envs {

using Vector = Eigen::VectorXd;

/// One action index per agent.
using JointAction = std::vector<int>;

struct EnvState {
  Vector state;
  std::vector<Vector> obs;
  int step = 0;
  bool done = false;
};

struct StepOutcome {
  double reward = 0.0;
  EnvState next;
  bool done = false;
};

/// Cooperative partially observable environment with a shared team reward.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual int n_agents() const = 0;
  virtual int n_actions() const = 0;
  virtual int obs_dim() const = 0;
  virtual int state_dim() const = 0;
  virtual int horizon() const = 0;

  virtual const EnvState& reset(std::uint64_t seed) = 0;
  virtual StepOutcome step(const JointAction& actions) = 0;
  virtual const EnvState& current() const = 0;

  /// 1 for actions the agent may take in the current state.
  virtual std::vector<std::uint8_t> action_mask(int /*agent*/) const {
    return std::vector<std::uint8_t>(static_cast<std::size_t>(n_actions()), 1);
  }

  /// Whether the episode ended because the task ended, as opposed to a
  /// horizon cutoff. Targets do not bootstrap past a terminated step.
  virtual bool terminated() const = 0;

  /// Whether the finished episode reached the environment's goal.
  virtual bool succeeded() const = 0;
};

}  // namespace optmarl::envs
