#pragma once

#include <string>
#include <utility>
#include <vector>

#include "optmarl/diffcore/layers.hpp"

namespace optmarl::networks {

using diffcore::Graph;
using diffcore::Matrix;
using diffcore::ParameterStore;
using diffcore::Rng;
using diffcore::Var;

/// MLP → GRU → MLP over one row per agent. Shared by all agents; callers
/// append an agent-id one-hot to the input.
class RecurrentNet {
 public:
  RecurrentNet() = default;
  RecurrentNet(std::string prefix, Eigen::Index input, Eigen::Index hidden, Eigen::Index output)
      : prefix_(std::move(prefix)),
        input_(input),
        hidden_(hidden),
        output_(output),
        fc_in_{prefix_ + ".fc_in", input, hidden},
        gru_{prefix_ + ".gru", hidden, hidden},
        fc_out_{prefix_ + ".fc_out", hidden, output} {}

  const std::string& prefix() const { return prefix_; }
  Eigen::Index input_dim() const { return input_; }
  Eigen::Index hidden_dim() const { return hidden_; }
  Eigen::Index output_dim() const { return output_; }

  void declare(ParameterStore& store, Rng& rng) const {
    fc_in_.declare(store, rng);
    gru_.declare(store, rng);
    fc_out_.declare(store, rng);
  }

  struct Bound {
    diffcore::DenseLayer::Bound fc_in;
    diffcore::GruLayer::Bound gru;
    diffcore::DenseLayer::Bound fc_out;

    /// One step: returns (outputs, next hidden).
    std::pair<Var, Var> step(Var x, Var h) const {
      Var next = gru(diffcore::relu(fc_in(x)), h);
      return {fc_out(next), next};
    }
  };

  Bound bind(Graph& g, ParameterStore& store) const {
    return {fc_in_.bind(g, store), gru_.bind(g, store), fc_out_.bind(g, store)};
  }

  struct Sequence {
    Var outputs;              // (steps·rows × output), step-major
    std::vector<Var> hidden;  // hidden state after each step
  };

  /// Runs `steps` consecutive steps from a zero hidden state. `inputs` stacks
  /// the per-step inputs step-major with `rows` rows per step.
  Sequence unroll(Graph& g, const Bound& net, Var inputs, Eigen::Index rows) const {
    if (rows <= 0 || inputs.rows() % rows != 0) throw ConfigError(prefix_ + ": input rows not divisible by batch");
    if (inputs.cols() != input_)
      throw ConfigError(prefix_ + ": expected input width " + std::to_string(input_) + ", got " +
                        std::to_string(inputs.cols()));
    const Eigen::Index steps = inputs.rows() / rows;
    Var embedded = diffcore::relu(net.fc_in(inputs));
    Var h = g.constant(Matrix::Zero(rows, hidden_));
    Sequence seq;
    seq.hidden.reserve(static_cast<std::size_t>(steps));
    for (Eigen::Index t = 0; t < steps; ++t) {
      h = net.gru(diffcore::slice_rows(embedded, t * rows, rows), h);
      seq.hidden.push_back(h);
    }
    seq.outputs = net.fc_out(diffcore::concat_rows(seq.hidden));
    return seq;
  }

 private:
  std::string prefix_;
  Eigen::Index input_ = 0;
  Eigen::Index hidden_ = 0;
  Eigen::Index output_ = 0;
  diffcore::DenseLayer fc_in_;
  diffcore::GruLayer gru_;
  diffcore::DenseLayer fc_out_;
};

/// Evaluates one step without recording gradients: (outputs, next hidden).
inline std::pair<Matrix, Matrix> agent_forward(const RecurrentNet& net, ParameterStore& store, const Matrix& inputs,
                                               const Matrix& hidden) {
  if (hidden.cols() != net.hidden_dim() || hidden.rows() != inputs.rows())
    throw ConfigError(net.prefix() + ": hidden state shape mismatch");
  Graph g(false);
  auto bound = net.bind(g, store);
  auto [out, next] = bound.step(g.constant(inputs), g.constant(hidden));
  return {out.value(), next.value()};
}

/// Stateful single-step evaluator used while acting: keeps the hidden state
/// of every agent between environment steps.
class RecurrentActor {
 public:
  RecurrentActor(const RecurrentNet& net, Eigen::Index rows) : net_(&net), hidden_(Matrix::Zero(rows, net.hidden_dim())) {}

  void reset() { hidden_.setZero(); }
  const Matrix& hidden() const { return hidden_; }

  /// Advances one step; returns outputs (rows × output).
  Matrix step(ParameterStore& store, const Matrix& inputs) {
    auto [out, next] = agent_forward(*net_, store, inputs, hidden_);
    hidden_ = std::move(next);
    return out;
  }

 private:
  const RecurrentNet* net_;
  Matrix hidden_;
};

}  // namespace optmarl::networks
