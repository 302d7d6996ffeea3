#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "ctxnmt/errors.hpp"

namespace ctxnmt {

using Index = Eigen::Index;

/// Dense column-major matrix. Vectors are single columns; batched activations
/// put one sentence per column.
template <typename Scalar>
using Tensor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Rng = std::mt19937_64;

/// Column-wise softmax with max-subtraction. Throws DomainError on an empty input.
template <typename Derived>
Tensor<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& scores) {
  using Scalar = typename Derived::Scalar;
  if (scores.size() == 0) throw DomainError("softmax: empty input");
  Tensor<Scalar> out(scores.rows(), scores.cols());
  for (Index j = 0; j < scores.cols(); ++j) {
    const Scalar shift = scores.col(j).maxCoeff();
    out.col(j) = (scores.col(j).array() - shift).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

/// Column-wise log-sum-exp.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 1, Eigen::Dynamic> log_sum_exp(const Eigen::MatrixBase<Derived>& scores) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> out(scores.cols());
  for (Index j = 0; j < scores.cols(); ++j) {
    const Scalar shift = scores.col(j).maxCoeff();
    out(j) = shift + std::log((scores.col(j).array() - shift).exp().sum());
  }
  return out;
}

template <typename Derived>
Tensor<typename Derived::Scalar> sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& x) {
  return x.allFinite();
}

}  // namespace ctxnmt
