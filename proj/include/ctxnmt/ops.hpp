#pragma once

// Differentiable primitives over Graph nodes. Activations are laid out with
// one batch member per column.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ctxnmt/graph.hpp"

namespace ctxnmt {

namespace detail {

inline std::string shape_str(Index r, Index c) { return std::to_string(r) + "x" + std::to_string(c); }

template <typename Scalar>
void require_same_shape(const char* op, const Expr<Scalar>& a, const Expr<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.rows(), a.cols()) + " and " +
                     shape_str(b.rows(), b.cols()) + " differ");
}

template <typename Scalar>
bool any_grad(const Expr<Scalar>& a) {
  return a.graph().requires_grad(a.id());
}

template <typename Scalar>
bool any_grad(const Expr<Scalar>& a, const Expr<Scalar>& b) {
  return a.graph().requires_grad(a.id()) || b.graph().requires_grad(b.id());
}

}  // namespace detail

template <typename Scalar>
Expr<Scalar> matmul(const Expr<Scalar>& a, const Expr<Scalar>& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + detail::shape_str(a.rows(), a.cols()) + " times " +
                     detail::shape_str(b.rows(), b.cols()));
  auto& g = a.graph();
  const std::size_t ia = a.id(), ib = b.id();
  Tensor<Scalar> v = a.value() * b.value();
  return g.emplace(std::move(v), detail::any_grad(a, b), [ia, ib](Graph<Scalar>& g, const Tensor<Scalar>& d) {
    if (g.requires_grad(ia)) g.accumulate(ia, d * g.value(ib).transpose());
    if (g.requires_grad(ib)) g.accumulate(ib, g.value(ia).transpose() * d);
  });
}

template <typename Scalar>
Expr<Scalar> add(const Expr<Scalar>& a, const Expr<Scalar>& b) {
  detail::require_same_shape("add", a, b);
  auto& g = a.graph();
  const std::size_t ia = a.id(), ib = b.id();
  Tensor<Scalar> v = a.value() + b.value();
  return g.emplace(std::move(v), detail::any_grad(a, b), [ia, ib](Graph<Scalar>& g, const Tensor<Scalar>& d) {
    g.accumulate(ia, d);
    g.accumulate(ib, d);
  });
}

/// Adds a column vector to every column of x.
template <typename Scalar>
Expr<Scalar> add_bias(const Expr<Scalar>& x, const Expr<Scalar>& bias) {
  if (bias.cols() != 1 || bias.rows() != x.rows())
    throw ShapeError("add_bias: bias " + detail::shape_str(bias.rows(), bias.cols()) + " for input " +
                     detail::shape_str(x.rows(), x.cols()));
  auto& g = x.graph();
  const std::size_t ix = x.id(), ib = bias.id();
  Tensor<Scalar> v = x.value().colwise() + bias.value().col(0);
  return g.emplace(std::move(v), detail::any_grad(x, bias), [ix, ib](Graph<Scalar>& g, const Tensor<Scalar>& d) {
    g.accumulate(ix, d);
    if (g.requires_grad(ib)) g.accumulate(ib, d.rowwise().sum());
  });
}

/// Elementwise product.
template <typename Scalar>
Expr<Scalar> cmul(const Expr<Scalar>& a, const Expr<Scalar>& b) {
  detail::require_same_shape("cmul", a, b);
  auto& g = a.graph();
  const std::size_t ia = a.id(), ib = b.id();
  Tensor<Scalar> v = a.value().cwiseProduct(b.value());
  return g.emplace(std::move(v), detail::any_grad(a, b), [ia, ib](Graph<Scalar>& g, const Tensor<Scalar>& d) {
    if (g.requires_grad(ia)) g.accumulate(ia, d.cwiseProduct(g.value(ib)));
    if (g.requires_grad(ib)) g.accumulate(ib, d.cwiseProduct(g.value(ia)));
  });
}

template <typename Scalar>
Expr<Scalar> scale(const Expr<Scalar>& a, Scalar factor) {
  auto& g = a.graph();
  const std::size_t ia = a.id();
  Tensor<Scalar> v = a.value() * factor;
  return g.emplace(std::move(v), detail::any_grad(a),
                   [ia, factor](Graph<Scalar>& g, const Tensor<Scalar>& d) { g.accumulate(ia, d * factor); });
}

template <typename Scalar>
Expr<Scalar> sigmoid(const Expr<Scalar>& a) {
  auto& g = a.graph();
  const std::size_t ia = a.id();
  Tensor<Scalar> v = ctxnmt::sigmoid(a.value());
  const std::size_t out = g.size();
  return g.emplace(std::move(v), detail::any_grad(a), [ia, out](Graph<Scalar>& g, const Tensor<Scalar>& d) {
    const auto& s = g.value(out).array();
    g.accumulate(ia, (d.array() * s * (Scalar(1) - s)).matrix());
  });
}

template <typename Scalar>
Expr<Scalar> tanh(const Expr<Scalar>& a) {
  auto& g = a.graph();
  const std::size_t ia = a.id();
  Tensor<Scalar> v = a.value().array().tanh().matrix();
  const std::size_t out = g.size();
  return g.emplace(std::move(v), detail::any_grad(a), [ia, out](Graph<Scalar>& g, const Tensor<Scalar>& d) {
    const auto& t = g.value(out).array();
    g.accumulate(ia, (d.array() * (Scalar(1) - t * t)).matrix());
  });
}

/// Softmax over each column.
template <typename Scalar>
Expr<Scalar> softmax_cols(const Expr<Scalar>& a) {
  auto& g = a.graph();
  const std::size_t ia = a.id();
  Tensor<Scalar> v = ctxnmt::softmax(a.value());
  const std::size_t out = g.size();
  return g.emplace(std::move(v), detail::any_grad(a), [ia, out](Graph<Scalar>& g, const Tensor<Scalar>& d) {
    const Tensor<Scalar>& p = g.value(out);
    Tensor<Scalar> gi = p.cwiseProduct(d);
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> dots = gi.colwise().sum();
    gi -= p * dots.asDiagonal();
    g.accumulate(ia, gi);
  });
}

/// Stacks inputs vertically; all must have the same column count.
template <typename Scalar>
Expr<Scalar> concat_rows(std::span<const Expr<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  auto& g = parts.front().graph();
  const Index cols = parts.front().cols();
  Index rows = 0;
  bool needs = false;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
    needs = needs || detail::any_grad(p);
  }
  Tensor<Scalar> v(rows, cols);
  std::vector<std::size_t> ids;
  std::vector<Index> offsets;
  Index r = 0;
  for (const auto& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(r);
    r += p.rows();
  }
  return g.emplace(std::move(v), needs, [ids, offsets](Graph<Scalar>& g, const Tensor<Scalar>& d) {
    for (std::size_t k = 0; k < ids.size(); ++k)
      if (g.requires_grad(ids[k])) g.accumulate(ids[k], d.middleRows(offsets[k], g.value(ids[k]).rows()));
  });
}

template <typename Scalar>
Expr<Scalar> concat_rows(const Expr<Scalar>& a, const Expr<Scalar>& b) {
  const Expr<Scalar> parts[] = {a, b};
  return concat_rows<Scalar>(std::span<const Expr<Scalar>>(parts));
}

template <typename Scalar>
Expr<Scalar> slice_rows(const Expr<Scalar>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows())
    throw ShapeError("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") of " + std::to_string(a.rows()));
  auto& g = a.graph();
  const std::size_t ia = a.id();
  Tensor<Scalar> v = a.value().middleRows(start, count);
  return g.emplace(std::move(v), detail::any_grad(a), [ia, start](Graph<Scalar>& g, const Tensor<Scalar>& d) {
    g.accumulate_rows(ia, start, d);
  });
}

/// Selects rows of an embedding table, one per batch member, and returns them
/// as columns (d x batch). Gradients are scattered straight into table.grad.
template <typename Scalar>
Expr<Scalar> lookup(Graph<Scalar>& g, Parameter<Scalar>& table, std::span<const int> ids) {
  Tensor<Scalar> v(table.cols(), static_cast<Index>(ids.size()));
  for (std::size_t b = 0; b < ids.size(); ++b) {
    if (ids[b] < 0 || ids[b] >= table.rows())
      throw ContractError("lookup: index " + std::to_string(ids[b]) + " outside table '" + table.name + "' with " +
                          std::to_string(table.rows()) + " rows");
    v.col(static_cast<Index>(b)) = table.value.row(ids[b]).transpose();
  }
  Parameter<Scalar>* target = &table;
  std::vector<int> rows(ids.begin(), ids.end());
  return g.emplace(std::move(v), true, [target, rows](Graph<Scalar>&, const Tensor<Scalar>& d) {
    for (std::size_t b = 0; b < rows.size(); ++b) target->grad.row(rows[b]) += d.col(static_cast<Index>(b)).transpose();
  });
}

/// Inverted dropout: keeps each entry with probability 1 - p and rescales by 1/(1 - p).
template <typename Scalar>
Expr<Scalar> dropout(const Expr<Scalar>& a, double p, Rng& rng) {
  if (p <= 0.0) return a;
  if (p >= 1.0) throw ConfigError("dropout probability must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  const Scalar s = Scalar(1.0 / (1.0 - p));
  Tensor<Scalar> mask(a.rows(), a.cols());
  for (Index j = 0; j < mask.cols(); ++j)
    for (Index i = 0; i < mask.rows(); ++i) mask(i, j) = keep(rng) ? s : Scalar(0);
  auto m = a.graph().constant(std::move(mask));
  return cmul(a, m);
}

/// Negative log-softmax of each column picked at its target index: 1 x batch.
template <typename Scalar>
Expr<Scalar> cross_entropy(const Expr<Scalar>& logits, std::span<const int> targets) {
  if (static_cast<Index>(targets.size()) != logits.cols())
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(logits.cols()) + " columns");
  auto& g = logits.graph();
  const auto& z = logits.value();
  const auto lse = log_sum_exp(z);
  Tensor<Scalar> v(1, z.cols());
  for (Index j = 0; j < z.cols(); ++j) {
    const int t = targets[static_cast<std::size_t>(j)];
    if (t < 0 || t >= z.rows())
      throw ContractError("cross_entropy: target " + std::to_string(t) + " outside vocabulary of " +
                          std::to_string(z.rows()));
    v(0, j) = lse(j) - z(t, j);
  }
  const std::size_t il = logits.id();
  std::vector<int> tg(targets.begin(), targets.end());
  return g.emplace(std::move(v), detail::any_grad(logits), [il, tg](Graph<Scalar>& g, const Tensor<Scalar>& d) {
    Tensor<Scalar> p = ctxnmt::softmax(g.value(il));
    for (Index j = 0; j < p.cols(); ++j) p(tg[static_cast<std::size_t>(j)], j) -= Scalar(1);
    g.accumulate(il, p * d.row(0).asDiagonal());
  });
}

/// Sum of all entries, as a 1x1 node.
template <typename Scalar>
Expr<Scalar> sum(const Expr<Scalar>& a) {
  auto& g = a.graph();
  const std::size_t ia = a.id();
  Tensor<Scalar> v(1, 1);
  v(0, 0) = a.value().sum();
  return g.emplace(std::move(v), detail::any_grad(a), [ia](Graph<Scalar>& g, const Tensor<Scalar>& d) {
    g.accumulate(ia, Tensor<Scalar>::Constant(g.value(ia).rows(), g.value(ia).cols(), d(0, 0)));
  });
}

/// Column-wise dot product of two equally shaped inputs: 1 x batch.
template <typename Scalar>
Expr<Scalar> colwise_dot(const Expr<Scalar>& a, const Expr<Scalar>& b) {
  detail::require_same_shape("colwise_dot", a, b);
  auto& g = a.graph();
  const std::size_t ia = a.id(), ib = b.id();
  Tensor<Scalar> v = a.value().cwiseProduct(b.value()).colwise().sum();
  return g.emplace(std::move(v), detail::any_grad(a, b), [ia, ib](Graph<Scalar>& g, const Tensor<Scalar>& d) {
    if (g.requires_grad(ia)) g.accumulate(ia, g.value(ib) * d.row(0).asDiagonal());
    if (g.requires_grad(ib)) g.accumulate(ib, g.value(ia) * d.row(0).asDiagonal());
  });
}

/// Scales column j of x by weights(0, j). x is r x batch, weights 1 x batch.
template <typename Scalar>
Expr<Scalar> scale_cols(const Expr<Scalar>& x, const Expr<Scalar>& weights) {
  if (weights.rows() != 1 || weights.cols() != x.cols())
    throw ShapeError("scale_cols: weights " + detail::shape_str(weights.rows(), weights.cols()) + " for input " +
                     detail::shape_str(x.rows(), x.cols()));
  auto& g = x.graph();
  const std::size_t ix = x.id(), iw = weights.id();
  Tensor<Scalar> v = x.value() * weights.value().row(0).asDiagonal();
  return g.emplace(std::move(v), detail::any_grad(x, weights), [ix, iw](Graph<Scalar>& g, const Tensor<Scalar>& d) {
    if (g.requires_grad(ix)) g.accumulate(ix, d * g.value(iw).row(0).asDiagonal());
    if (g.requires_grad(iw)) g.accumulate(iw, d.cwiseProduct(g.value(ix)).colwise().sum());
  });
}

/// Elementwise sum of equally shaped inputs.
template <typename Scalar>
Expr<Scalar> add_n(std::span<const Expr<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("add_n: no inputs");
  auto& g = parts.front().graph();
  Tensor<Scalar> v = parts.front().value();
  bool needs = detail::any_grad(parts.front());
  std::vector<std::size_t> ids{parts.front().id()};
  for (std::size_t k = 1; k < parts.size(); ++k) {
    detail::require_same_shape("add_n", parts.front(), parts[k]);
    v += parts[k].value();
    needs = needs || detail::any_grad(parts[k]);
    ids.push_back(parts[k].id());
  }
  return g.emplace(std::move(v), needs, [ids](Graph<Scalar>& g, const Tensor<Scalar>& d) {
    for (auto id : ids) g.accumulate(id, d);
  });
}

}  // namespace ctxnmt
