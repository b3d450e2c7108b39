#pragma once

// Differentiable ops. Every op checks its input shapes and throws
// ConfigError on mismatch; output shape depends only on input shapes.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "optmarl/diffcore/graph.hpp"

namespace optmarl::diffcore {

namespace detail {

inline Graph& graph_of(Var a) {
  if (a.graph == nullptr) throw UsageError("op on an unbound Var");
  return *a.graph;
}

inline Graph& graph_of(Var a, Var b) {
  if (a.graph != b.graph) throw UsageError("op mixes nodes from different graphs");
  return graph_of(a);
}

inline void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ConfigError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace detail

/// x·Wᵀ + b with x (B×in), W (out×in), b (1×out).
inline Var dense(Var x, Var w, Var b) {
  Graph& g = detail::graph_of(x, w);
  const Matrix& xv = x.value();
  const Matrix& wv = w.value();
  const Matrix& bv = b.value();
  if (xv.cols() != wv.cols())
    throw ConfigError("dense: input " + shape_str(xv) + " does not match weights " + shape_str(wv));
  if (bv.rows() != 1 || bv.cols() != wv.rows())
    throw ConfigError("dense: bias " + shape_str(bv) + " does not match weights " + shape_str(wv));
  Matrix out = xv * wv.transpose();
  out.rowwise() += bv.row(0);
  return g.record(std::move(out), {x, w, b}, [x, w, b](Graph& g, std::size_t self) {
    const Matrix& dy = g.grad(self);
    if (g.requires_grad(x)) g.accumulate(x, dy * g.value(w));
    if (g.requires_grad(w)) g.accumulate(w, dy.transpose() * g.value(x));
    if (g.requires_grad(b)) g.accumulate(b, dy.colwise().sum());
  });
}

inline Var add(Var a, Var b) {
  Graph& g = detail::graph_of(a, b);
  detail::require_same_shape("add", a.value(), b.value());
  return g.record(a.value() + b.value(), {a, b}, [a, b](Graph& g, std::size_t self) {
    g.accumulate(a, g.grad(self));
    g.accumulate(b, g.grad(self));
  });
}

inline Var sub(Var a, Var b) {
  Graph& g = detail::graph_of(a, b);
  detail::require_same_shape("sub", a.value(), b.value());
  return g.record(a.value() - b.value(), {a, b}, [a, b](Graph& g, std::size_t self) {
    g.accumulate(a, g.grad(self));
    g.accumulate(b, -g.grad(self));
  });
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
  Graph& g = detail::graph_of(a, b);
  detail::require_same_shape("mul", a.value(), b.value());
  return g.record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Graph& g, std::size_t self) {
    const Matrix& dy = g.grad(self);
    if (g.requires_grad(a)) g.accumulate(a, dy.cwiseProduct(g.value(b)));
    if (g.requires_grad(b)) g.accumulate(b, dy.cwiseProduct(g.value(a)));
  });
}

inline Var scale(Var a, double c) {
  Graph& g = detail::graph_of(a);
  return g.record(a.value() * c, {a}, [a, c](Graph& g, std::size_t self) { g.accumulate(a, g.grad(self) * c); });
}

inline Var square(Var a) {
  Graph& g = detail::graph_of(a);
  return g.record(a.value().array().square().matrix(), {a}, [a](Graph& g, std::size_t self) {
    g.accumulate(a, (2.0 * g.grad(self).array() * g.value(a).array()).matrix());
  });
}

inline Var relu(Var a) {
  Graph& g = detail::graph_of(a);
  return g.record(a.value().cwiseMax(0.0), {a}, [a](Graph& g, std::size_t self) {
    g.accumulate(a, (g.value(a).array() > 0.0).select(g.grad(self), 0.0));
  });
}

/// ELU with unit scale: x for x > 0, exp(x) - 1 otherwise.
inline Var elu(Var a) {
  Graph& g = detail::graph_of(a);
  const Matrix& av = a.value();
  Matrix out = (av.array() > 0.0).select(av, av.array().exp() - 1.0);
  return g.record(std::move(out), {a}, [a](Graph& g, std::size_t self) {
    const Matrix& x = g.value(a);
    const Matrix& y = g.value(self);
    g.accumulate(a, (x.array() > 0.0).select(g.grad(self), g.grad(self).array() * (y.array() + 1.0)).matrix());
  });
}

inline Var sigmoid(Var a) {
  Graph& g = detail::graph_of(a);
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return g.record(std::move(out), {a}, [a](Graph& g, std::size_t self) {
    const auto y = g.value(self).array();
    g.accumulate(a, (g.grad(self).array() * y * (1.0 - y)).matrix());
  });
}

inline Var tanh(Var a) {
  Graph& g = detail::graph_of(a);
  return g.record(a.value().array().tanh().matrix(), {a}, [a](Graph& g, std::size_t self) {
    const auto y = g.value(self).array();
    g.accumulate(a, (g.grad(self).array() * (1.0 - y.square())).matrix());
  });
}

/// |x| with subgradient sign(x) (0 at x = 0).
inline Var abs(Var a) {
  Graph& g = detail::graph_of(a);
  return g.record(a.value().cwiseAbs(), {a}, [a](Graph& g, std::size_t self) {
    g.accumulate(a, (g.grad(self).array() * g.value(a).array().sign()).matrix());
  });
}

/// Sum over columns: (B×k) → (B×1).
inline Var row_sum(Var a) {
  Graph& g = detail::graph_of(a);
  return g.record(a.value().rowwise().sum(), {a}, [a](Graph& g, std::size_t self) {
    const Matrix& x = g.value(a);
    g.accumulate(a, g.grad(self).replicate(1, x.cols()));
  });
}

/// Sum of all entries → (1×1).
inline Var sum_all(Var a) {
  Graph& g = detail::graph_of(a);
  return g.record(Matrix::Constant(1, 1, a.value().sum()), {a}, [a](Graph& g, std::size_t self) {
    const Matrix& x = g.value(a);
    g.accumulate(a, Matrix::Constant(x.rows(), x.cols(), g.grad(self)(0, 0)));
  });
}

/// Picks column index[b] of every row b: (B×k) → (B×1).
inline Var gather_cols(Var a, std::vector<int> index) {
  Graph& g = detail::graph_of(a);
  const Matrix& x = a.value();
  if (static_cast<Eigen::Index>(index.size()) != x.rows())
    throw ConfigError("gather_cols: " + std::to_string(index.size()) + " indices for " + shape_str(x));
  Matrix out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const int c = index[static_cast<std::size_t>(r)];
    if (c < 0 || c >= x.cols()) throw ConfigError("gather_cols: index out of range");
    out(r, 0) = x(r, c);
  }
  return g.record(std::move(out), {a}, [a, index = std::move(index)](Graph& g, std::size_t self) {
    const Matrix& dy = g.grad(self);
    const Matrix& x = g.value(a);
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) dx(r, index[static_cast<std::size_t>(r)]) = dy(r, 0);
    g.accumulate(a, dx);
  });
}

/// Regroups consecutive blocks of `group` rows into one row:
/// (B·group × F) → (B × group·F), row b*group+i lands in column block i.
inline Var fold_rows(Var a, Eigen::Index group) {
  Graph& g = detail::graph_of(a);
  const Matrix& x = a.value();
  if (group <= 0 || x.rows() % group != 0)
    throw ConfigError("fold_rows: " + shape_str(x) + " rows not divisible by " + std::to_string(group));
  const Eigen::Index batch = x.rows() / group;
  const Eigen::Index width = x.cols();
  Matrix out(batch, group * width);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index i = 0; i < group; ++i) out.block(b, i * width, 1, width) = x.row(b * group + i);
  return g.record(std::move(out), {a}, [a, group, batch, width](Graph& g, std::size_t self) {
    const Matrix& dy = g.grad(self);
    Matrix dx(batch * group, width);
    for (Eigen::Index b = 0; b < batch; ++b)
      for (Eigen::Index i = 0; i < group; ++i) dx.row(b * group + i) = dy.block(b, i * width, 1, width);
    g.accumulate(a, dx);
  });
}

inline Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  Graph& g = detail::graph_of(a);
  const Matrix& x = a.value();
  if (start < 0 || count < 0 || start + count > x.rows())
    throw ConfigError("slice_rows: range out of bounds for " + shape_str(x));
  return g.record(x.middleRows(start, count), {a}, [a, start, count](Graph& g, std::size_t self) {
    if (!g.requires_grad(a)) return;
    g.grad(a.id).middleRows(start, count) += g.grad(self);
  });
}

inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ConfigError("concat_rows: no inputs");
  Graph& g = detail::graph_of(parts.front());
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    detail::graph_of(p, parts.front());
    if (p.cols() != cols) throw ConfigError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return g.record(std::move(out), parts, [parts](Graph& g, std::size_t self) {
    const Matrix& dy = g.grad(self);
    Eigen::Index r = 0;
    for (const Var& p : parts) {
      const Eigen::Index n = g.value(p).rows();
      if (g.requires_grad(p)) g.accumulate(p, dy.middleRows(r, n));
      r += n;
    }
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ConfigError("concat_cols: no inputs");
  Graph& g = detail::graph_of(parts.front());
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    detail::graph_of(p, parts.front());
    if (p.rows() != rows) throw ConfigError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return g.record(std::move(out), parts, [parts](Graph& g, std::size_t self) {
    const Matrix& dy = g.grad(self);
    Eigen::Index c = 0;
    for (const Var& p : parts) {
      const Eigen::Index n = g.value(p).cols();
      if (g.requires_grad(p)) g.accumulate(p, dy.middleCols(c, n));
      c += n;
    }
  });
}

/// Per-row vector-matrix product: q (B×n), w (B×n·E) holding one n×E matrix
/// per row in row-major blocks → (B×E), out(b,e) = Σ_i q(b,i)·w(b, i·E+e).
inline Var rowwise_mix(Var q, Var w, Eigen::Index embed) {
  Graph& g = detail::graph_of(q, w);
  const Matrix& qv = q.value();
  const Matrix& wv = w.value();
  const Eigen::Index n = qv.cols();
  if (wv.rows() != qv.rows() || wv.cols() != n * embed)
    throw ConfigError("rowwise_mix: weights " + shape_str(wv) + " incompatible with q " + shape_str(qv));
  Matrix out = Matrix::Zero(qv.rows(), embed);
  for (Eigen::Index i = 0; i < n; ++i)
    out.array() += wv.middleCols(i * embed, embed).array().colwise() * qv.col(i).array();
  return g.record(std::move(out), {q, w}, [q, w, n, embed](Graph& g, std::size_t self) {
    const Matrix& dy = g.grad(self);
    const Matrix& qv = g.value(q);
    const Matrix& wv = g.value(w);
    if (g.requires_grad(q)) {
      Matrix dq(qv.rows(), n);
      for (Eigen::Index i = 0; i < n; ++i)
        dq.col(i) = wv.middleCols(i * embed, embed).cwiseProduct(dy).rowwise().sum();
      g.accumulate(q, dq);
    }
    if (g.requires_grad(w)) {
      Matrix dw(wv.rows(), wv.cols());
      for (Eigen::Index i = 0; i < n; ++i)
        dw.middleCols(i * embed, embed) = (dy.array().colwise() * qv.col(i).array()).matrix();
      g.accumulate(w, dw);
    }
  });
}

/// Fused GRU cell, gate order (reset, update, candidate):
///   r = σ(x W_rᵀ + b_ir + h U_rᵀ + b_hr)
///   z = σ(x W_zᵀ + b_iz + h U_zᵀ + b_hz)
///   n = tanh(x W_nᵀ + b_in + r ∘ (h U_nᵀ + b_hn))
///   h' = (1 − z) ∘ n + z ∘ h
/// with w_in (3H×D), w_hid (3H×H), b_in and b_hid (1×3H).
inline Var gru_cell(Var x, Var h, Var w_in, Var w_hid, Var b_in, Var b_hid) {
  Graph& g = detail::graph_of(x, h);
  const Matrix& xv = x.value();
  const Matrix& hv = h.value();
  const Matrix& wi = w_in.value();
  const Matrix& wh = w_hid.value();
  const Eigen::Index hid = hv.cols();
  if (wi.rows() != 3 * hid || wi.cols() != xv.cols())
    throw ConfigError("gru_cell: input weights " + shape_str(wi) + " incompatible with x " + shape_str(xv) +
                      " and hidden " + std::to_string(hid));
  if (wh.rows() != 3 * hid || wh.cols() != hid)
    throw ConfigError("gru_cell: recurrent weights " + shape_str(wh) + " incompatible with hidden " +
                      std::to_string(hid));
  if (xv.rows() != hv.rows()) throw ConfigError("gru_cell: batch mismatch " + shape_str(xv) + " vs " + shape_str(hv));
  if (b_in.rows() != 1 || b_in.cols() != 3 * hid || b_hid.rows() != 1 || b_hid.cols() != 3 * hid)
    throw ConfigError("gru_cell: bias shape mismatch");

  Matrix gi = xv * wi.transpose();
  gi.rowwise() += b_in.value().row(0);
  Matrix gh = hv * wh.transpose();
  gh.rowwise() += b_hid.value().row(0);

  const auto sig = [](const auto& a) { return (1.0 / (1.0 + (-a).exp())).matrix(); };
  Matrix r = sig(gi.leftCols(hid).array() + gh.leftCols(hid).array());
  Matrix z = sig(gi.middleCols(hid, hid).array() + gh.middleCols(hid, hid).array());
  Matrix hn = gh.rightCols(hid);
  Matrix n = (gi.rightCols(hid).array() + r.array() * hn.array()).tanh().matrix();
  Matrix out = ((1.0 - z.array()) * n.array() + z.array() * hv.array()).matrix();

  return g.record(std::move(out), {x, h, w_in, w_hid, b_in, b_hid},
                  [=, r = std::move(r), z = std::move(z), n = std::move(n), hn = std::move(hn)](
                      Graph& g, std::size_t self) {
                    const Matrix& dy = g.grad(self);
                    const Matrix& hv = g.value(h);
                    const Eigen::Index rows = dy.rows();
                    const auto dz = (dy.array() * (hv.array() - n.array())).eval();
                    const auto dn_pre = (dy.array() * (1.0 - z.array()) * (1.0 - n.array().square())).eval();
                    const auto dr = (dn_pre * hn.array()).eval();
                    Matrix dgi(rows, 3 * hid);
                    Matrix dgh(rows, 3 * hid);
                    dgi.leftCols(hid) = (dr * r.array() * (1.0 - r.array())).matrix();
                    dgi.middleCols(hid, hid) = (dz * z.array() * (1.0 - z.array())).matrix();
                    dgi.rightCols(hid) = dn_pre.matrix();
                    dgh.leftCols(2 * hid) = dgi.leftCols(2 * hid);
                    dgh.rightCols(hid) = (dn_pre * r.array()).matrix();
                    if (g.requires_grad(x)) g.accumulate(x, dgi * g.value(w_in));
                    if (g.requires_grad(h)) {
                      Matrix dh = (dy.array() * z.array()).matrix();
                      dh.noalias() += dgh * g.value(w_hid);
                      g.accumulate(h, dh);
                    }
                    if (g.requires_grad(w_in)) g.accumulate(w_in, dgi.transpose() * g.value(x));
                    if (g.requires_grad(w_hid)) g.accumulate(w_hid, dgh.transpose() * hv);
                    if (g.requires_grad(b_in)) g.accumulate(b_in, dgi.colwise().sum());
                    if (g.requires_grad(b_hid)) g.accumulate(b_hid, dgh.colwise().sum());
                  });
}

/// Mean of mask ∘ weight ∘ (a − target)² over entries with nonzero mask.
/// `target`, `weight` and `mask` are constants of a's shape (B×1).
inline Var weighted_mse(Var a, const Matrix& target, const Matrix& weight, const Matrix& mask) {
  Graph& g = detail::graph_of(a);
  const Matrix& av = a.value();
  detail::require_same_shape("weighted_mse", av, target);
  detail::require_same_shape("weighted_mse", av, weight);
  detail::require_same_shape("weighted_mse", av, mask);
  const double count = (mask.array() != 0.0).count();
  const double denom = count > 0 ? count : 1.0;
  Matrix coeff = (weight.array() * mask.array()).matrix();
  Matrix diff = av - target;
  const double loss = (coeff.array() * diff.array().square()).sum() / denom;
  return g.record(Matrix::Constant(1, 1, loss), {a},
                  [a, coeff = std::move(coeff), diff = std::move(diff), denom](Graph& g, std::size_t self) {
                    const double up = g.grad(self)(0, 0);
                    g.accumulate(a, ((2.0 * up / denom) * coeff.array() * diff.array()).matrix());
                  });
}

}  // namespace optmarl::diffcore
