#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "ctxnmt/graph.hpp"

namespace ctxnmt {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Index worst_index = 0;
  std::size_t coordinates = 0;
};

/// Compares analytic gradients with central finite differences over every
/// coordinate of every parameter. `loss` builds the scalar loss on the given
/// graph; it must be deterministic. The relative error of one coordinate is
///   |analytic - numeric| / max(1, |analytic|, |numeric|).
template <typename Scalar>
GradCheckResult grad_check(const std::function<Expr<Scalar>(Graph<Scalar>&)>& loss, ParameterSet<Scalar>& params,
                           double eps = 1e-5) {
  params.zero_grad();
  {
    Graph<Scalar> g;
    g.backward(loss(g));
  }
  auto eval = [&] {
    Graph<Scalar> g(false);
    return static_cast<double>(loss(g).value()(0, 0));
  };

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    for (Index i = 0; i < p.value.size(); ++i) {
      Scalar& x = p.value.data()[i];
      const Scalar saved = x;
      x = saved + Scalar(eps);
      const double up = eval();
      x = saved - Scalar(eps);
      const double down = eval();
      x = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = static_cast<double>(p.grad.data()[i]);
      const double err =
          std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
      ++result.coordinates;
      if (err > result.max_relative_error || result.worst_parameter.empty()) {
        result.max_relative_error = err;
        result.worst_parameter = p.name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace ctxnmt
