#pragma once

#include <string>
#include <utility>

#include "ctxnmt/ops.hpp"

namespace ctxnmt {

/// Cell parameters of one LSTM. Gate rows are stacked in the fixed order
/// [input, forget, cell-candidate, output], each block hidden_size() rows.
template <typename Scalar>
struct LstmWeights {
  Parameter<Scalar>* input_to_gates = nullptr;   // 4h x d_in
  Parameter<Scalar>* hidden_to_gates = nullptr;  // 4h x h
  Parameter<Scalar>* bias = nullptr;             // 4h x 1

  Index hidden_size() const { return hidden_to_gates->cols(); }
  Index input_size() const { return input_to_gates->cols(); }
};

template <typename Scalar>
LstmWeights<Scalar> add_lstm(ParameterSet<Scalar>& params, const std::string& prefix, Index input_size,
                             Index hidden_size) {
  if (input_size <= 0 || hidden_size <= 0) throw ConfigError("lstm '" + prefix + "': sizes must be positive");
  LstmWeights<Scalar> w;
  w.input_to_gates = &params.add(prefix + ".Wx", 4 * hidden_size, input_size);
  w.hidden_to_gates = &params.add(prefix + ".Wh", 4 * hidden_size, hidden_size);
  w.bias = &params.add(prefix + ".b", 4 * hidden_size, 1);
  return w;
}

template <typename Scalar>
LstmWeights<Scalar> lstm_weights(ParameterSet<Scalar>& params, const std::string& prefix) {
  LstmWeights<Scalar> w;
  w.input_to_gates = &params.at(prefix + ".Wx");
  w.hidden_to_gates = &params.at(prefix + ".Wh");
  w.bias = &params.at(prefix + ".b");
  if (w.input_to_gates->rows() % 4 != 0 || w.hidden_to_gates->rows() != w.input_to_gates->rows() ||
      w.hidden_to_gates->rows() != 4 * w.hidden_to_gates->cols() || w.bias->rows() != w.input_to_gates->rows())
    throw ShapeError("lstm '" + prefix + "': inconsistent gate blocks");
  return w;
}

template <typename Scalar>
struct LstmState {
  Expr<Scalar> h;
  Expr<Scalar> c;
};

/// Zero (h, c) for a batch of the given width.
template <typename Scalar>
LstmState<Scalar> zero_state(Graph<Scalar>& g, Index hidden_size, Index batch) {
  auto z = g.constant(Tensor<Scalar>::Zero(hidden_size, batch));
  return {z, z};
}

/// One step of a no-peephole LSTM:
///   c = f * c_prev + i * g,  h = o * tanh(c)
/// with sigmoid gates i, f, o and tanh candidate g.
template <typename Scalar>
LstmState<Scalar> lstm_cell(Graph<Scalar>& g, const LstmWeights<Scalar>& w, const Expr<Scalar>& x,
                            const LstmState<Scalar>& prev) {
  const Index h = w.hidden_size();
  if (x.rows() != w.input_size())
    throw ShapeError("lstm_cell: input has " + std::to_string(x.rows()) + " rows, weights expect " +
                     std::to_string(w.input_size()));
  if (prev.h.rows() != h || prev.c.rows() != h || prev.h.cols() != x.cols() || prev.c.cols() != x.cols())
    throw ShapeError("lstm_cell: state shape does not match hidden size " + std::to_string(h));

  auto z = add_bias(add(matmul(g.parameter(*w.input_to_gates), x), matmul(g.parameter(*w.hidden_to_gates), prev.h)),
                    g.parameter(*w.bias));
  auto in = sigmoid(slice_rows(z, 0, h));
  auto forget = sigmoid(slice_rows(z, h, h));
  auto cand = tanh(slice_rows(z, 2 * h, h));
  auto out = sigmoid(slice_rows(z, 3 * h, h));
  auto c = add(cmul(forget, prev.c), cmul(in, cand));
  auto hid = cmul(out, tanh(c));
  return {hid, c};
}

/// Value-only convenience: evaluates a single cell on column vectors.
template <typename Scalar>
std::pair<Vector<Scalar>, Vector<Scalar>> lstm_cell(const Vector<Scalar>& x, const Vector<Scalar>& h_prev,
                                                    const Vector<Scalar>& c_prev, const LstmWeights<Scalar>& w) {
  Graph<Scalar> g(false);
  auto st = lstm_cell(g, w, g.constant(x), LstmState<Scalar>{g.constant(h_prev), g.constant(c_prev)});
  return {st.h.value().col(0), st.c.value().col(0)};
}

/// Runs a recurrence over a sequence of inputs from zero state, returning
/// every state. With reverse = true the inputs are consumed last to first and
/// the returned states are still indexed by input position.
template <typename Scalar>
std::vector<LstmState<Scalar>> run_lstm(Graph<Scalar>& g, const LstmWeights<Scalar>& w,
                                        std::span<const Expr<Scalar>> inputs, bool reverse = false) {
  std::vector<LstmState<Scalar>> states(inputs.size());
  if (inputs.empty()) return states;
  LstmState<Scalar> s = zero_state(g, w.hidden_size(), inputs.front().cols());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const std::size_t t = reverse ? inputs.size() - 1 - k : k;
    s = lstm_cell(g, w, inputs[t], s);
    states[t] = s;
  }
  return states;
}

}  // namespace ctxnmt
