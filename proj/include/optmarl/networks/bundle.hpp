#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "optmarl/networks/joint_critic.hpp"
#include "optmarl/networks/mixer.hpp"
#include "optmarl/networks/recurrent_net.hpp"

namespace optmarl::networks {

enum class Algo { Vdn, Qmix, OptQmix };

inline std::string to_string(Algo a) {
  switch (a) {
    case Algo::Vdn: return "vdn";
    case Algo::Qmix: return "qmix";
    case Algo::OptQmix: return "opt-qmix";
  }
  return "?";
}

inline Algo parse_algo(const std::string& name) {
  if (name == "vdn") return Algo::Vdn;
  if (name == "qmix") return Algo::Qmix;
  if (name == "opt-qmix") return Algo::OptQmix;
  throw ConfigError("algo: unknown algorithm '" + name + "' (expected vdn, qmix or opt-qmix)");
}

struct BundleSpec {
  int n_agents = 2;
  int n_actions = 3;
  int obs_dim = 1;
  int state_dim = 1;
  int hidden = 64;
  int embed = 32;
  int critic_feature = 32;
  Algo algo = Algo::Qmix;
};

/// Every network of one learner plus frozen target copies.
///
/// Parameter names are prefixed `agent.`, `mixer.`, `opt.` and `critic.`;
/// the optimistic network and joint critic exist only for opt-qmix.
class AgentNetBundle {
 public:
  AgentNetBundle(const BundleSpec& spec, std::uint64_t seed)
      : spec_(spec),
        agent_("agent", spec.obs_dim + spec.n_agents, spec.hidden, spec.n_actions),
        mixer_(spec.algo == Algo::Vdn ? MixerKind::Vdn : MixerKind::Qmix, spec.n_agents, spec.state_dim, spec.embed) {
    if (spec.n_agents <= 0 || spec.n_actions <= 0 || spec.obs_dim <= 0 || spec.state_dim <= 0 || spec.hidden <= 0)
      throw ConfigError("bundle: non-positive network dimension");
    Rng rng(seed);
    agent_.declare(live_, rng);
    mixer_.declare(live_, rng);
    if (has_opt()) {
      opt_ = RecurrentNet("opt", spec.state_dim + spec.obs_dim + spec.n_agents, spec.hidden, spec.n_actions);
      opt_.declare(live_, rng);
      critic_ = JointCritic(spec.n_agents, spec.n_actions, spec.obs_dim, spec.state_dim, spec.hidden,
                            spec.critic_feature);
      critic_.declare(live_, rng);
    }
    target_ = live_.clone_values();
  }

  const BundleSpec& spec() const { return spec_; }
  bool has_opt() const { return spec_.algo == Algo::OptQmix; }

  const RecurrentNet& agent() const { return agent_; }
  const RecurrentNet& opt() const { return opt_; }
  const JointCritic& critic() const { return critic_; }
  const Mixer& mixer() const { return mixer_; }

  ParameterStore& live() { return live_; }
  ParameterStore& target() { return target_; }
  const ParameterStore& live() const { return live_; }
  const ParameterStore& target() const { return target_; }

  void sync_targets() { target_.copy_values_from(live_); }

  /// Agent-network input rows, one per agent: [obs_i, onehot(i)].
  Matrix agent_inputs(const std::vector<Eigen::VectorXd>& obs) const {
    check_obs(obs);
    Matrix x = Matrix::Zero(spec_.n_agents, spec_.obs_dim + spec_.n_agents);
    for (int i = 0; i < spec_.n_agents; ++i) {
      x.row(i).head(spec_.obs_dim) = obs[static_cast<std::size_t>(i)].transpose();
      x(i, spec_.obs_dim + i) = 1.0;
    }
    return x;
  }

  /// Optimistic-network input rows: [state, obs_i, onehot(i)].
  Matrix opt_inputs(const Eigen::VectorXd& state, const std::vector<Eigen::VectorXd>& obs) const {
    check_obs(obs);
    if (state.size() != spec_.state_dim) throw ConfigError("bundle: state width mismatch");
    Matrix x = Matrix::Zero(spec_.n_agents, spec_.state_dim + spec_.obs_dim + spec_.n_agents);
    for (int i = 0; i < spec_.n_agents; ++i) {
      x.row(i).head(spec_.state_dim) = state.transpose();
      x.row(i).segment(spec_.state_dim, spec_.obs_dim) = obs[static_cast<std::size_t>(i)].transpose();
      x(i, spec_.state_dim + spec_.obs_dim + i) = 1.0;
    }
    return x;
  }

 private:
  void check_obs(const std::vector<Eigen::VectorXd>& obs) const {
    if (static_cast<int>(obs.size()) != spec_.n_agents) throw ConfigError("bundle: one observation per agent expected");
    for (const auto& o : obs)
      if (o.size() != spec_.obs_dim) throw ConfigError("bundle: observation width mismatch");
  }

  BundleSpec spec_;
  RecurrentNet agent_;
  RecurrentNet opt_;
  JointCritic critic_;
  Mixer mixer_;
  ParameterStore live_;
  ParameterStore target_;
};

}  // namespace optmarl::networks
