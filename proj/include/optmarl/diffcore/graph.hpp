#pragma once

// Reverse-mode differentiation over dense matrices.
//
// A Graph is a tape: nodes are appended in creation order, so reverse
// creation order is a valid reverse topological order. Graphs are rebuilt
// for every forward pass and never shared between threads.

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "optmarl/errors.hpp"

namespace optmarl::diffcore {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

inline std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

/// A trainable tensor with its gradient slot and RMSProp accumulator.
struct Parameter {
  Matrix value;
  Matrix grad;
  Matrix sq_avg;

  Parameter() = default;
  Parameter(Eigen::Index rows, Eigen::Index cols)
      : value(Matrix::Zero(rows, cols)),
        grad(Matrix::Zero(rows, cols)),
        sq_avg(Matrix::Zero(rows, cols)) {}
};

/// Named trainable parameters. Iteration order is lexicographic by name and
/// references stay valid across insertions.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    auto [it, inserted] = entries_.try_emplace(name, rows, cols);
    if (!inserted) throw ConfigError("duplicate parameter name: " + name);
    return it->second;
  }

  Parameter& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }
  const Parameter& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  std::size_t size() const { return entries_.size(); }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, p] : entries_) out.push_back(name);
    return out;
  }

  void zero_grad() {
    for (auto& [name, p] : entries_) p.grad.setZero();
  }

  bool same_layout(const ParameterStore& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    auto a = entries_.begin();
    auto b = other.entries_.begin();
    for (; a != entries_.end(); ++a, ++b) {
      if (a->first != b->first) return false;
      if (a->second.value.rows() != b->second.value.rows() ||
          a->second.value.cols() != b->second.value.cols())
        return false;
    }
    return true;
  }

  /// Copies parameter values (not gradients or optimizer state) from a store
  /// with the identical layout.
  void copy_values_from(const ParameterStore& other) {
    if (!same_layout(other)) throw ConfigError("parameter stores have different layouts");
    auto b = other.entries_.begin();
    for (auto a = entries_.begin(); a != entries_.end(); ++a, ++b) a->second.value = b->second.value;
  }

  /// A store with the same names and values but fresh gradient and optimizer slots.
  ParameterStore clone_values() const {
    ParameterStore out;
    for (const auto& [name, p] : entries_) out.add(name, p.value.rows(), p.value.cols()).value = p.value;
    return out;
  }

 private:
  std::map<std::string, Parameter> entries_;
};

class Graph;

/// Handle to a node of a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  explicit Graph(bool track_gradients = true) : track_(track_gradients) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool tracking() const { return track_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), nullptr, {}, false, {}});
    return {this, nodes_.size() - 1};
  }

  Var scalar_constant(double v) { return constant(Matrix::Constant(1, 1, v)); }

  /// Leaf that views the parameter value without copying it. The parameter
  /// must outlive the graph and stay unmodified while the graph is in use.
  Var parameter(Parameter& p) {
    if (!track_) {
      nodes_.push_back(Node{Matrix(), &p.value, {}, false, {}});
      return {this, nodes_.size() - 1};
    }
    Parameter* target = &p;
    nodes_.push_back(Node{Matrix(), &p.value, {}, true,
                          [target](Graph& g, std::size_t self) { target->grad += g.nodes_[self].grad; }});
    return {this, nodes_.size() - 1};
  }

  const Matrix& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.ref != nullptr ? *n.ref : n.value;
  }
  const Matrix& value(Var v) const { return value(v.id); }

  bool requires_grad(Var v) const { return nodes_[v.id].needs_grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  /// Gradient slot of a node; valid during and after backward().
  Matrix& grad(std::size_t id) { return nodes_[id].grad; }
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }

  /// Records an op result. The backward function is kept only when some
  /// parent requires a gradient.
  Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward) {
    bool needs = false;
    if (track_) {
      for (const Var& p : parents) needs = needs || nodes_[p.id].needs_grad;
    }
    nodes_.push_back(Node{std::move(value), nullptr, {}, needs, needs ? std::move(backward) : BackwardFn{}});
    return {this, nodes_.size() - 1};
  }

  Var record(Matrix value, const std::vector<Var>& parents, BackwardFn backward) {
    bool needs = false;
    if (track_) {
      for (const Var& p : parents) needs = needs || nodes_[p.id].needs_grad;
    }
    nodes_.push_back(Node{std::move(value), nullptr, {}, needs, needs ? std::move(backward) : BackwardFn{}});
    return {this, nodes_.size() - 1};
  }

  /// Propagates d(loss)/d(node) to every reachable node and accumulates into
  /// the gradient slots of the parameters bound to this graph. Node gradients
  /// are reset on every call; parameter gradients are not.
  void backward(Var loss) {
    if (loss.graph != this) throw UsageError("backward: loss belongs to another graph");
    const Matrix& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) throw UsageError("backward: loss must be scalar, got " + shape_str(lv));
    for (std::size_t i = 0; i <= loss.id; ++i) {
      Node& n = nodes_[i];
      if (n.needs_grad) {
        const Matrix& v = value(i);
        n.grad.setZero(v.rows(), v.cols());
      }
    }
    if (!nodes_[loss.id].needs_grad) return;
    nodes_[loss.id].grad(0, 0) = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.needs_grad && n.backward) n.backward(*this, i);
    }
  }

  /// Adds to a parent's gradient if it participates in differentiation.
  template <typename Expr>
  void accumulate(Var parent, const Expr& delta) {
    Node& n = nodes_[parent.id];
    if (n.needs_grad) n.grad += delta;
  }

 private:
  struct Node {
    Matrix value;
    const Matrix* ref;
    Matrix grad;
    bool needs_grad;
    BackwardFn backward;
  };

  bool track_;
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return graph->value(id); }

inline double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw UsageError("scalar(): node has shape " + shape_str(v));
  return v(0, 0);
}

}  // namespace optmarl::diffcore
