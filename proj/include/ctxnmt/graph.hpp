#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ctxnmt/parameters.hpp"
#include "ctxnmt/tensor.hpp"

namespace ctxnmt {

template <typename Scalar>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <typename Scalar>
class Expr {
 public:
  Expr() = default;
  Expr(Graph<Scalar>* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph<Scalar>& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor<Scalar>& value() const { return graph_->value(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }

 private:
  Graph<Scalar>* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Tape for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the node vector is already a
/// topological order: every input id is smaller than the id of its consumer.
/// backward() walks the tape once in reverse and sums gradient contributions
/// from every consumer of a node. Parameter nodes are interned, so a tensor
/// used at many time steps (or shared between two roles) receives the sum of
/// all its contributions.
///
/// A graph built with record = false only evaluates; no closures are stored
/// and backward() is rejected.
template <typename Scalar>
class Graph {
 public:
  using Matrix = Tensor<Scalar>;
  using Backward = std::function<void(Graph&, const Matrix& out_grad)>;

  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Expr<Scalar> constant(Matrix value) { return emplace(std::move(value), false, {}); }

  /// Leaf bound to a trainable tensor. Repeated calls return the same node.
  Expr<Scalar> parameter(Parameter<Scalar>& p) {
    for (const auto& [param, id] : interned_)
      if (param == &p) return Expr<Scalar>(this, id);
    Parameter<Scalar>* target = &p;
    auto e = emplace(p.value, record_, [target](Graph&, const Matrix& g) { target->grad += g; });
    interned_.emplace_back(target, e.id());
    return e;
  }

  /// Appends a node. The closure receives the node's accumulated gradient and
  /// pushes contributions to its inputs through accumulate().
  Expr<Scalar> emplace(Matrix value, bool requires_grad, Backward backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = record_ && requires_grad;
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Expr<Scalar>(this, nodes_.size() - 1);
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  /// Adds g into rows [start, start + g.rows()) of a node's gradient.
  template <typename Derived>
  void accumulate_rows(std::size_t id, Index start, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.grad.middleRows(start, g.rows()) += g;
  }

  /// Gradient of a node after backward(); zero-sized when nothing reached it.
  const Matrix& gradient(std::size_t id) const { return nodes_[id].grad; }

  /// Propagates d(loss)/d(node) to every node and adds parameter gradients
  /// into Parameter::grad. The loss must be a 1x1 node.
  void backward(const Expr<Scalar>& loss) {
    if (!record_) throw ContractError("backward on a non-recording graph");
    if (&loss.graph() != this) throw ContractError("backward: loss belongs to another graph");
    const Matrix& v = loss.value();
    if (v.rows() != 1 || v.cols() != 1)
      throw ContractError("backward: loss must be scalar, got " + std::to_string(v.rows()) + "x" +
                          std::to_string(v.cols()));
    for (auto& n : nodes_) n.grad.resize(0, 0);
    if (!nodes_[loss.id()].requires_grad) return;
    nodes_[loss.id()].grad = Matrix::Ones(1, 1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
      n.backward(*this, n.grad);
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };

  bool record_;
  std::vector<Node> nodes_;
  std::vector<std::pair<Parameter<Scalar>*, std::size_t>> interned_;
};

}  // namespace ctxnmt
