#pragma once

// Context networks and their fusion with Lookup embeddings.
//
// A context network reads the whole source sentence and produces one context
// vector per position. The source embedding table doubles as the context
// network's embedding table, so gradients from both roles land in the same
// Parameter.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxnmt/lstm.hpp"

namespace ctxnmt {

enum class ContextKind { None, NBOW, BiLSTM, HoLSTM };
enum class IntegrationKind { Gate, Concat };

std::string_view to_string(ContextKind kind);
std::string_view to_string(IntegrationKind kind);
ContextKind parse_context_kind(std::string_view text);
IntegrationKind parse_integration_kind(std::string_view text);

/// Token ids of a batch of equal-length sentences, position-major:
/// columns[t][b] is the token at position t of sentence b.
using TokenColumns = std::vector<std::vector<int>>;

/// Transposes equal-length sentences into position-major columns.
TokenColumns to_columns(const std::vector<std::vector<int>>& sentences);

/// Shape parameters of a context network.
struct ContextShape {
  ContextKind kind = ContextKind::None;
  IntegrationKind integration = IntegrationKind::Concat;
  Index embed_dim = 0;
  /// Per-direction hidden size of the BiLSTM context network; 0 selects embed_dim / 2.
  Index bilstm_hidden = 0;

  Index bilstm_hidden_size() const { return bilstm_hidden > 0 ? bilstm_hidden : embed_dim / 2; }
  /// Dimension of c_t for the configured kind (0 for None).
  Index context_dim() const;
  /// Throws ConfigError for combinations that cannot be wired (e.g. Gate with dim(c) != d).
  void validate() const;
};

/// Trainable tensors of the context network, viewed from a ParameterSet.
template <typename Scalar>
struct ContextParams {
  ContextShape shape;
  Parameter<Scalar>* table = nullptr;  // shared source embeddings, |V_s| x d
  LstmWeights<Scalar> forward;         // BiLSTM
  LstmWeights<Scalar> backward;        // BiLSTM
  LstmWeights<Scalar> held_out;        // HoLSTM
  Parameter<Scalar>* projection = nullptr;  // Concat, d x (d + dim(c))
  int held_out_id = -1;
};

/// Registers the context network's tensors (not the shared table) in params.
template <typename Scalar>
void add_context_params(ParameterSet<Scalar>& params, const ContextShape& shape) {
  shape.validate();
  const Index d = shape.embed_dim;
  switch (shape.kind) {
    case ContextKind::None:
      return;
    case ContextKind::NBOW:
      break;
    case ContextKind::BiLSTM:
      add_lstm(params, "ctx.fwd", d, shape.bilstm_hidden_size());
      add_lstm(params, "ctx.bwd", d, shape.bilstm_hidden_size());
      break;
    case ContextKind::HoLSTM:
      add_lstm(params, "ctx.holstm", d, d);
      break;
  }
  if (shape.integration == IntegrationKind::Concat) params.add("ctx.W3", d, d + shape.context_dim());
}

template <typename Scalar>
ContextParams<Scalar> context_params(ParameterSet<Scalar>& params, const ContextShape& shape,
                                     const std::string& table_name, int held_out_id) {
  shape.validate();
  ContextParams<Scalar> cp;
  cp.shape = shape;
  cp.table = &params.at(table_name);
  cp.held_out_id = held_out_id;
  if (cp.table->cols() != shape.embed_dim)
    throw ShapeError("context: embedding table has " + std::to_string(cp.table->cols()) + " columns, expected " +
                     std::to_string(shape.embed_dim));
  if (shape.kind == ContextKind::BiLSTM) {
    cp.forward = lstm_weights(params, "ctx.fwd");
    cp.backward = lstm_weights(params, "ctx.bwd");
  } else if (shape.kind == ContextKind::HoLSTM) {
    cp.held_out = lstm_weights(params, "ctx.holstm");
  }
  if (shape.kind != ContextKind::None && shape.integration == IntegrationKind::Concat)
    cp.projection = &params.at("ctx.W3");
  return cp;
}

/// Lookup embedding: row x_t of the table for every batch member (d x batch).
template <typename Scalar>
Expr<Scalar> lookup_embed(Graph<Scalar>& g, Parameter<Scalar>& table, std::span<const int> ids) {
  return lookup(g, table, ids);
}

/// Neural bag-of-words context: the mean Lookup embedding of the sentence.
/// The same vector serves every position.
template <typename Scalar>
Expr<Scalar> nbow_context(Graph<Scalar>& g, Parameter<Scalar>& table, const TokenColumns& x) {
  if (x.empty()) throw DomainError("nbow_context: empty sentence");
  std::vector<Expr<Scalar>> rows;
  rows.reserve(x.size());
  for (const auto& col : x) rows.push_back(lookup(g, table, col));
  return scale(add_n<Scalar>(rows), Scalar(1) / static_cast<Scalar>(x.size()));
}

/// BiLSTM context: c_t = [forward state at t ; backward state at t], both
/// recurrences running the full sentence from zero state.
template <typename Scalar>
std::vector<Expr<Scalar>> bilstm_context(Graph<Scalar>& g, const ContextParams<Scalar>& cp, const TokenColumns& x) {
  if (x.empty()) throw DomainError("bilstm_context: empty sentence");
  if (cp.forward.input_size() != cp.table->cols() || cp.backward.input_size() != cp.table->cols())
    throw ShapeError("bilstm_context: LSTM input size does not match embedding width");
  std::vector<Expr<Scalar>> emb;
  emb.reserve(x.size());
  for (const auto& col : x) emb.push_back(lookup(g, *cp.table, col));
  auto fwd = run_lstm<Scalar>(g, cp.forward, emb, false);
  auto bwd = run_lstm<Scalar>(g, cp.backward, emb, true);
  std::vector<Expr<Scalar>> out;
  out.reserve(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) out.push_back(concat_rows(fwd[t].h, bwd[t].h));
  return out;
}

/// Held-out LSTM context for position t (0-based): the token at t is replaced
/// by the held-out symbol and the final state of a forward recurrence over the
/// whole replaced sentence is returned.
template <typename Scalar>
Expr<Scalar> holstm_context(Graph<Scalar>& g, const ContextParams<Scalar>& cp, const TokenColumns& x, std::size_t t) {
  if (x.empty()) throw DomainError("holstm_context: empty sentence");
  if (t >= x.size())
    throw ContractError("holstm_context: position " + std::to_string(t) + " outside sentence of length " +
                        std::to_string(x.size()));
  if (cp.held_out_id < 0 || cp.held_out_id >= cp.table->rows())
    throw ContractError("holstm_context: held-out symbol id outside the vocabulary");
  const std::vector<int> symbol(x[t].size(), cp.held_out_id);
  LstmState<Scalar> s = zero_state(g, cp.held_out.hidden_size(), static_cast<Index>(x[t].size()));
  for (std::size_t k = 0; k < x.size(); ++k) {
    auto e = lookup(g, *cp.table, k == t ? std::span<const int>(symbol) : std::span<const int>(x[k]));
    s = lstm_cell(g, cp.held_out, e, s);
  }
  return s.h;
}

/// f'(x) = e * sigmoid(c), elementwise.
template <typename Scalar>
Expr<Scalar> gate_integrate(const Expr<Scalar>& e, const Expr<Scalar>& c) {
  if (e.rows() != c.rows() || e.cols() != c.cols())
    throw ShapeError("gate_integrate: embedding has " + std::to_string(e.rows()) + " rows, context " +
                     std::to_string(c.rows()));
  return cmul(e, sigmoid(c));
}

/// f'(x) = W3 [e ; c].
template <typename Scalar>
Expr<Scalar> concat_integrate(const Expr<Scalar>& e, const Expr<Scalar>& c, const Expr<Scalar>& projection) {
  if (projection.rows() != e.rows() || projection.cols() != e.rows() + c.rows())
    throw ShapeError("concat_integrate: projection is " + std::to_string(projection.rows()) + "x" +
                     std::to_string(projection.cols()) + ", expected " + std::to_string(e.rows()) + "x" +
                     std::to_string(e.rows() + c.rows()));
  return matmul(projection, concat_rows(e, c));
}

/// Context-aware embeddings for a batch of equal-length sentences. With
/// ContextKind::None this is the plain Lookup embedding at every position.
template <typename Scalar>
std::vector<Expr<Scalar>> contextual_embed_sequence(Graph<Scalar>& g, const ContextParams<Scalar>& cp,
                                                    const TokenColumns& x) {
  if (x.empty()) throw DomainError("contextual_embed_sequence: empty sentence");
  cp.shape.validate();
  std::vector<Expr<Scalar>> out;
  out.reserve(x.size());
  for (const auto& col : x) out.push_back(lookup_embed(g, *cp.table, col));
  if (cp.shape.kind == ContextKind::None) return out;

  std::vector<Expr<Scalar>> contexts;
  switch (cp.shape.kind) {
    case ContextKind::NBOW:
      contexts.assign(x.size(), nbow_context(g, *cp.table, x));
      break;
    case ContextKind::BiLSTM:
      contexts = bilstm_context(g, cp, x);
      break;
    case ContextKind::HoLSTM:
      for (std::size_t t = 0; t < x.size(); ++t) contexts.push_back(holstm_context(g, cp, x, t));
      break;
    case ContextKind::None:
      break;
  }
  if (contexts.front().rows() != cp.shape.context_dim())
    throw ShapeError("contextual_embed_sequence: context network produced " + std::to_string(contexts.front().rows()) +
                     " dims, expected " + std::to_string(cp.shape.context_dim()));

  if (cp.shape.integration == IntegrationKind::Gate) {
    for (std::size_t t = 0; t < x.size(); ++t) out[t] = gate_integrate(out[t], contexts[t]);
  } else {
    auto w3 = g.parameter(*cp.projection);
    for (std::size_t t = 0; t < x.size(); ++t) out[t] = concat_integrate(out[t], contexts[t], w3);
  }
  return out;
}

}  // namespace ctxnmt
