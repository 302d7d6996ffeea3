#include "doctest.h"

#include <cmath>

#include "ctxnmt/grad_check.hpp"
#include "ctxnmt/lstm.hpp"
#include "test_util.hpp"

using namespace ctxnmt;
using testutil::Mat;
using testutil::random_matrix;

TEST_CASE("softmax examples") {
  Vector<double> v = Vector<double>::Zero(3);
  auto p = softmax(v);
  for (Index i = 0; i < 3; ++i) CHECK(p(i, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  for (double x : {-1e6, -3.5, 0.0, 42.0, 1e6}) {
    Vector<double> s(1);
    s << x;
    CHECK(softmax(s)(0, 0) == 1.0);
  }

  // e^1 / (e^1 + e^2) = 1 / (1 + e)
  Vector<double> two(2);
  two << 1.0, 2.0;
  auto q = softmax(two);
  CHECK(q(0, 0) == doctest::Approx(0.2689414213699951).epsilon(1e-14));
  CHECK(q(1, 0) == doctest::Approx(0.7310585786300049).epsilon(1e-14));

  CHECK_THROWS_AS(softmax(Vector<double>(0)), DomainError);
}

TEST_CASE("softmax normalizes and ignores constant shifts") {
  Rng rng(11);
  std::uniform_int_distribution<int> len(1, 8);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  for (int trial = 0; trial < 200; ++trial) {
    Mat v = random_matrix(len(rng), 1, rng, 20.0);
    auto p = softmax(v);
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    CHECK((p.array() >= 0.0).all());
    Mat shifted = v.array() + shift(rng);
    CHECK((softmax(shifted) - p).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("lstm_cell examples") {
  ParameterSet<double> params;
  auto w = add_lstm(params, "cell", 3, 1);

  SUBCASE("zero weights and zero state give zero output for any input") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      Vector<double> x = random_matrix(3, 1, rng, 10.0);
      auto [h, c] = lstm_cell<double>(x, Vector<double>::Zero(1), Vector<double>::Zero(1), w);
      CHECK(h(0) == 0.0);
      CHECK(c(0) == 0.0);
    }
  }

  SUBCASE("forget gate halves the carried cell") {
    Vector<double> x = Vector<double>::Zero(3);
    Vector<double> c_prev(1);
    c_prev << 2.0;
    auto [h, c] = lstm_cell<double>(x, Vector<double>::Zero(1), c_prev, w);
    CHECK(c(0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(h(0) == doctest::Approx(0.5 * std::tanh(1.0)).epsilon(1e-15));
    CHECK(h(0) == doctest::Approx(0.3807970779778824).epsilon(1e-14));
  }

  SUBCASE("shapes") {
    ParameterSet<double> p2;
    auto w2 = add_lstm(p2, "cell", 5, 7);
    Rng rng(4);
    testutil::fill_uniform(p2, rng);
    auto [h, c] = lstm_cell<double>(random_matrix(5, 1, rng), Vector<double>::Zero(7), Vector<double>::Zero(7), w2);
    CHECK(h.size() == 7);
    CHECK(c.size() == 7);
    CHECK_THROWS_AS(lstm_cell<double>(random_matrix(4, 1, rng), Vector<double>::Zero(7), Vector<double>::Zero(7), w2),
                    ShapeError);
  }
}

TEST_CASE("lstm weights keep the four gate blocks") {
  ParameterSet<double> params;
  add_lstm(params, "a", 3, 2);
  auto w = lstm_weights(params, "a");
  CHECK(w.input_to_gates->rows() == 8);
  CHECK(w.hidden_size() == 2);
  params.add("bad.Wx", 6, 3);
  params.add("bad.Wh", 6, 2);
  params.add("bad.b", 6, 1);
  CHECK_THROWS_AS(lstm_weights(params, "bad"), ShapeError);
}

TEST_CASE("backward on linear and sigmoid losses") {
  Rng rng(5);
  ParameterSet<double> params;
  auto& W = params.add("W", 3, 4);
  W.value = random_matrix(3, 4, rng);
  Mat x = random_matrix(4, 1, rng);
  {
    Graph<double> g;
    auto loss = sum(matmul(g.parameter(W), g.constant(x)));
    g.backward(loss);
  }
  Mat expected = Mat::Ones(3, 1) * x.transpose();
  CHECK((W.grad - expected).cwiseAbs().maxCoeff() < 1e-15);

  auto& w = params.add("w", 1, 1);
  {
    Graph<double> g;
    g.backward(sum(sigmoid(g.parameter(w))));
  }
  CHECK(w.grad(0, 0) == 0.25);
}

TEST_CASE("backward rejects non-scalar losses") {
  Graph<double> g;
  auto v = g.constant(Mat::Ones(2, 1));
  CHECK_THROWS_AS(g.backward(v), ContractError);
  Graph<double> eval(false);
  auto s = eval.constant(Mat::Ones(1, 1));
  CHECK_THROWS_AS(eval.backward(s), ContractError);
}

TEST_CASE("fan-out gradients are summed") {
  ParameterSet<double> params;
  auto& p = params.add("p", 2, 1);
  p.value << 1.5, -2.0;
  Graph<double> g;
  auto a = g.parameter(p);
  auto b = g.parameter(p);
  CHECK(a.id() == b.id());
  // loss = sum(p * p) + sum(p)  ->  grad 2p + 1
  g.backward(add(sum(cmul(a, b)), sum(a)));
  CHECK(p.grad(0, 0) == doctest::Approx(4.0));
  CHECK(p.grad(1, 0) == doctest::Approx(-3.0));
}

namespace {

// Central-difference check of d sum(f(inputs)) / d inputs for one primitive.
double primitive_error(const std::function<Expr<double>(Graph<double>&, std::vector<Expr<double>>&)>& f,
                       std::vector<Mat> inputs) {
  ParameterSet<double> params;
  for (std::size_t k = 0; k < inputs.size(); ++k) params.add("in" + std::to_string(k), inputs[k].rows(), inputs[k].cols()).value = inputs[k];
  auto loss = [&](Graph<double>& g) {
    std::vector<Expr<double>> xs;
    for (std::size_t k = 0; k < params.size(); ++k) xs.push_back(g.parameter(params[k]));
    // Weight the output so that sum() does not hide sign errors in symmetric ops.
    auto y = f(g, xs);
    Mat weights(y.rows(), y.cols());
    for (Index i = 0; i < weights.size(); ++i) weights.data()[i] = 0.5 + 0.1 * static_cast<double>(i % 7);
    return sum(cmul(y, g.constant(weights)));
  };
  return grad_check<double>(loss, params, 1e-5).max_relative_error;
}

}  // namespace

TEST_CASE("primitive gradients match finite differences on random shapes") {
  Rng rng(2024);
  std::uniform_int_distribution<Index> ext(1, 8);
  for (int trial = 0; trial < 25; ++trial) {
    const Index r = ext(rng), c = ext(rng), k = ext(rng);
    CAPTURE(r);
    CAPTURE(c);
    CAPTURE(k);
    CHECK(primitive_error([](auto&, auto& x) { return matmul(x[0], x[1]); },
                          {random_matrix(r, k, rng), random_matrix(k, c, rng)}) < 1e-4);
    CHECK(primitive_error([](auto&, auto& x) { return add(x[0], x[1]); },
                          {random_matrix(r, c, rng), random_matrix(r, c, rng)}) < 1e-4);
    CHECK(primitive_error([](auto&, auto& x) { return add_bias(x[0], x[1]); },
                          {random_matrix(r, c, rng), random_matrix(r, 1, rng)}) < 1e-4);
    CHECK(primitive_error([](auto&, auto& x) { return cmul(x[0], x[1]); },
                          {random_matrix(r, c, rng), random_matrix(r, c, rng)}) < 1e-4);
    CHECK(primitive_error([](auto&, auto& x) { return sigmoid(x[0]); }, {random_matrix(r, c, rng, 4.0)}) < 1e-4);
    CHECK(primitive_error([](auto&, auto& x) { return tanh(x[0]); }, {random_matrix(r, c, rng, 3.0)}) < 1e-4);
    CHECK(primitive_error([](auto&, auto& x) { return softmax_cols(x[0]); }, {random_matrix(r, c, rng, 3.0)}) < 1e-4);
    CHECK(primitive_error([](auto&, auto& x) { return concat_rows(x[0], x[1]); },
                          {random_matrix(r, c, rng), random_matrix(k, c, rng)}) < 1e-4);
    const Index start = std::uniform_int_distribution<Index>(0, r - 1)(rng);
    const Index count = std::uniform_int_distribution<Index>(1, r - start)(rng);
    CHECK(primitive_error([=](auto&, auto& x) { return slice_rows(x[0], start, count); }, {random_matrix(r, c, rng)}) <
          1e-4);
    CHECK(primitive_error([](auto&, auto& x) { return colwise_dot(x[0], x[1]); },
                          {random_matrix(r, c, rng), random_matrix(r, c, rng)}) < 1e-4);
    CHECK(primitive_error([](auto&, auto& x) { return scale_cols(x[0], x[1]); },
                          {random_matrix(r, c, rng), random_matrix(1, c, rng)}) < 1e-4);
    CHECK(primitive_error([](auto&, auto& x) { return scale(x[0], 0.37); }, {random_matrix(r, c, rng)}) < 1e-4);

    std::vector<int> targets(static_cast<std::size_t>(c));
    for (auto& t : targets) t = std::uniform_int_distribution<int>(0, static_cast<int>(r) - 1)(rng);
    CHECK(primitive_error([=](auto&, auto& x) { return cross_entropy(x[0], std::span<const int>(targets)); },
                          {random_matrix(r, c, rng, 3.0)}) < 1e-4);

    // Fixed dropout mask: the seeded generator is re-created on every evaluation.
    const auto seed = rng();
    CHECK(primitive_error(
              [=](auto&, auto& x) {
                Rng local(seed);
                return dropout(x[0], 0.3, local);
              },
              {random_matrix(r, c, rng)}) < 1e-4);
  }
}

TEST_CASE("lookup gradient is one on the selected row") {
  ParameterSet<double> params;
  auto& table = params.add("E", 6, 4);
  Rng rng(8);
  table.value = random_matrix(6, 4, rng);
  const std::vector<int> ids{3};
  auto result = grad_check<double>([&](Graph<double>& g) { return sum(lookup(g, table, std::span<const int>(ids))); },
                                   params);
  CHECK(result.max_relative_error < 1e-9);
  for (Index r = 0; r < 6; ++r)
    for (Index c = 0; c < 4; ++c) CHECK(table.grad(r, c) == (r == 3 ? 1.0 : 0.0));
  Graph<double> g;
  const std::vector<int> bad{6};
  CHECK_THROWS_AS(lookup(g, table, std::span<const int>(bad)), ContractError);
}

TEST_CASE("grad_check examples") {
  Rng rng(9);
  ParameterSet<double> params;
  auto& theta = params.add("theta", 5, 3);
  theta.value = random_matrix(5, 3, rng, 2.0);
  auto quad = grad_check<double>(
      [&](Graph<double>& g) {
        auto t = g.parameter(theta);
        return sum(cmul(t, t));
      },
      params);
  CHECK(quad.max_relative_error < 1e-9);
  CHECK(quad.coordinates == 15);
  CHECK((theta.grad - 2.0 * theta.value).cwiseAbs().maxCoeff() < 1e-12);

  ParameterSet<double> cell;
  auto w = add_lstm(cell, "cell", 4, 3);
  testutil::fill_uniform(cell, rng, 1.0);
  Mat x = random_matrix(4, 2, rng), h0 = random_matrix(3, 2, rng), c0 = random_matrix(3, 2, rng);
  auto lstm = grad_check<double>(
      [&](Graph<double>& g) {
        auto s = lstm_cell(g, w, g.constant(x), LstmState<double>{g.constant(h0), g.constant(c0)});
        return add(sum(cmul(s.h, s.h)), sum(s.c));
      },
      cell);
  CHECK(lstm.max_relative_error < 1e-6);
}

TEST_CASE("graph evaluation is deterministic") {
  ParameterSet<double> params;
  auto w = add_lstm(params, "cell", 6, 5);
  Rng rng(10);
  testutil::fill_uniform(params, rng);
  Mat x = random_matrix(6, 3, rng);
  auto run = [&] {
    Graph<double> g;
    auto s = lstm_cell(g, w, g.constant(x), zero_state(g, 5, 3));
    s = lstm_cell(g, w, g.constant(x), s);
    return Mat(s.h.value());
  };
  const Mat a = run(), b = run();
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0);
}

TEST_CASE("primitives keep finite values on finite inputs") {
  Graph<double> g(false);
  Mat big(2, 2);
  big << 800.0, -800.0, 1e4, -1e4;
  auto x = g.constant(big);
  CHECK(sigmoid(x).value().allFinite());
  CHECK(tanh(x).value().allFinite());
  CHECK(softmax_cols(x).value().allFinite());
  const std::vector<int> t{1, 0};
  CHECK(cross_entropy(x, std::span<const int>(t)).value().allFinite());
}
