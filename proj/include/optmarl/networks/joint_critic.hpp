#pragma once

#include <string>
#include <vector>

#include "optmarl/networks/recurrent_net.hpp"

namespace optmarl::networks {

/// Unconstrained joint value Q_jt(s, o, a). Each agent's observation and
/// one-hot action pass through a shared recurrent feature extractor; the
/// features of all agents are concatenated with the state and fed to a
/// two-layer head producing a scalar.
class JointCritic {
 public:
  JointCritic() = default;
  JointCritic(Eigen::Index n_agents, Eigen::Index n_actions, Eigen::Index obs_dim, Eigen::Index state_dim,
              Eigen::Index hidden, Eigen::Index feature_dim, std::string prefix = "critic")
      : n_agents_(n_agents),
        n_actions_(n_actions),
        obs_dim_(obs_dim),
        state_dim_(state_dim),
        features_(prefix + ".feature", obs_dim + n_actions + n_agents, hidden, feature_dim),
        head_in_{prefix + ".head_in", state_dim + n_agents * feature_dim, hidden},
        head_out_{prefix + ".head_out", hidden, 1} {}

  const RecurrentNet& features() const { return features_; }
  Eigen::Index n_agents() const { return n_agents_; }
  Eigen::Index n_actions() const { return n_actions_; }
  Eigen::Index obs_dim() const { return obs_dim_; }
  Eigen::Index state_dim() const { return state_dim_; }

  void declare(ParameterStore& store, Rng& rng) const {
    features_.declare(store, rng);
    head_in_.declare(store, rng);
    head_out_.declare(store, rng);
  }

  /// Feature-extractor input row for one agent: [obs, onehot(action), onehot(agent)].
  Eigen::RowVectorXd feature_input(const Eigen::VectorXd& obs, int action, int agent) const {
    if (obs.size() != obs_dim_) throw ConfigError("critic: observation width mismatch");
    if (action < 0 || action >= n_actions_) throw ConfigError("critic: action out of range");
    if (agent < 0 || agent >= n_agents_) throw ConfigError("critic: agent out of range");
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(obs_dim_ + n_actions_ + n_agents_);
    row.head(obs_dim_) = obs.transpose();
    row[obs_dim_ + action] = 1.0;
    row[obs_dim_ + n_actions_ + agent] = 1.0;
    return row;
  }

  /// features: (B·n × F) agent-major within each batch row; state: (B × S).
  Var head(Graph& g, ParameterStore& store, Var features, Var state) const {
    Var joint = diffcore::fold_rows(features, n_agents_);
    if (state.rows() != joint.rows() || state.cols() != state_dim_) throw ConfigError("critic: state shape mismatch");
    Var x = diffcore::concat_cols({joint, state});
    return head_out_.bind(g, store)(diffcore::relu(head_in_.bind(g, store)(x)));
  }

 private:
  Eigen::Index n_agents_ = 0;
  Eigen::Index n_actions_ = 0;
  Eigen::Index obs_dim_ = 0;
  Eigen::Index state_dim_ = 0;
  RecurrentNet features_;
  diffcore::DenseLayer head_in_;
  diffcore::DenseLayer head_out_;
};

/// Q_jt for a single step from zero feature-extractor hidden state.
inline double joint_critic_forward(const JointCritic& critic, ParameterStore& store, const Eigen::VectorXd& state,
                                   const std::vector<Eigen::VectorXd>& obs, const std::vector<int>& joint_action) {
  if (static_cast<Eigen::Index>(obs.size()) != critic.n_agents() ||
      static_cast<Eigen::Index>(joint_action.size()) != critic.n_agents())
    throw ConfigError("critic: expected one observation and one action per agent");
  Matrix inputs(critic.n_agents(), critic.features().input_dim());
  for (Eigen::Index i = 0; i < critic.n_agents(); ++i)
    inputs.row(i) = critic.feature_input(obs[static_cast<std::size_t>(i)], joint_action[static_cast<std::size_t>(i)],
                                         static_cast<int>(i));
  Graph g(false);
  auto net = critic.features().bind(g, store);
  auto [feat, next] =
      net.step(g.constant(inputs), g.constant(Matrix::Zero(critic.n_agents(), critic.features().hidden_dim())));
  return critic.head(g, store, feat, g.constant(state.transpose())).scalar();
}

}  // namespace optmarl::networks
