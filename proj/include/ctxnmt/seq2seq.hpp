#pragma once

// Global-general-attention encoder-decoder with input feeding.

#include <cmath>
#include <string>
#include <vector>

#include "ctxnmt/context.hpp"
#include "ctxnmt/special_tokens.hpp"

namespace ctxnmt {

enum class EncoderDirection { Uni, Bi };

std::string_view to_string(EncoderDirection dir);
EncoderDirection parse_encoder_direction(std::string_view text);

/// Architecture of one model. A bi-directional encoder uses decoder_hidden / 2
/// units per direction so that concatenated states match the decoder width; a
/// uni-directional encoder uses decoder_hidden units.
struct ModelConfig {
  Index embed_dim = 500;
  EncoderDirection encoder = EncoderDirection::Bi;
  int encoder_layers = 2;
  Index decoder_hidden = 500;
  int decoder_layers = 2;
  ContextKind context = ContextKind::None;
  IntegrationKind integration = IntegrationKind::Concat;
  /// Per-direction hidden size of a BiLSTM context network; 0 means embed_dim / 2.
  Index context_hidden = 0;
  Index source_vocab = 0;
  Index target_vocab = 0;
  double dropout = 0.3;

  Index encoder_hidden() const {
    return encoder == EncoderDirection::Bi ? decoder_hidden / 2 : decoder_hidden;
  }
  ContextShape context_shape() const {
    return ContextShape{context, integration, embed_dim, context_hidden};
  }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Number of trainable scalars a model with this configuration holds.
std::size_t parameter_count(const ModelConfig& cfg);

template <typename Scalar>
struct EncoderStates {
  /// Top-layer state per source position, decoder_hidden x batch.
  std::vector<Expr<Scalar>> states;
  /// W_att h_t per position, cached for the bilinear attention score.
  std::vector<Expr<Scalar>> keys;
  /// Final (h, c) of every encoder layer, directions concatenated in bi mode.
  std::vector<LstmState<Scalar>> finals;

  /// The sentence summary h = h_n.
  const Expr<Scalar>& summary() const { return states.back(); }
};

template <typename Scalar>
struct DecoderState {
  std::vector<LstmState<Scalar>> layers;
  /// Previous attentional vector, fed to the bottom layer with the next target embedding.
  Expr<Scalar> feed;

  const Expr<Scalar>& top() const { return layers.back().h; }
};

template <typename Scalar>
struct AttentionResult {
  Expr<Scalar> context;  // a_t, decoder_hidden x batch
  Expr<Scalar> weights;  // alpha, n x batch
};

/// General attention against precomputed keys W_att h_k:
///   score_k = query . key_k,  alpha = softmax(score),  a = sum_k alpha_k h_k.
template <typename Scalar>
AttentionResult<Scalar> attention(const Expr<Scalar>& query, const std::vector<Expr<Scalar>>& keys,
                                  const std::vector<Expr<Scalar>>& states) {
  if (keys.size() != states.size() || states.empty()) throw ShapeError("attention: keys and states must align");
  std::vector<Expr<Scalar>> scores;
  scores.reserve(keys.size());
  for (const auto& k : keys) scores.push_back(colwise_dot(query, k));
  auto alpha = softmax_cols(concat_rows<Scalar>(scores));
  std::vector<Expr<Scalar>> parts;
  parts.reserve(states.size());
  for (std::size_t k = 0; k < states.size(); ++k)
    parts.push_back(scale_cols(states[k], slice_rows(alpha, static_cast<Index>(k), 1)));
  return {add_n<Scalar>(parts), alpha};
}

/// Same as above, computing keys from W_att on the fly.
template <typename Scalar>
AttentionResult<Scalar> attention(const Expr<Scalar>& query, const Expr<Scalar>& w_att,
                                  const std::vector<Expr<Scalar>>& states) {
  std::vector<Expr<Scalar>> keys;
  keys.reserve(states.size());
  for (const auto& h : states) keys.push_back(matmul(w_att, h));
  return attention(query, keys, states);
}

template <typename Scalar>
struct StepOutput {
  DecoderState<Scalar> state;
  Expr<Scalar> logits;       // target_vocab x batch
  Expr<Scalar> attentional;  // g-hat_t
  Expr<Scalar> attention;    // alpha over source positions
};

template <typename Scalar>
class Seq2Seq {
 public:
  explicit Seq2Seq(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const Index d = cfg_.embed_dim, h = cfg_.decoder_hidden, he = cfg_.encoder_hidden();
    params_.add("src.embed", cfg_.source_vocab, d);
    params_.add("tgt.embed", cfg_.target_vocab, d);
    add_context_params(params_, cfg_.context_shape());
    for (int l = 0; l < cfg_.encoder_layers; ++l) {
      const Index in = l == 0 ? d : h;
      add_lstm(params_, layer_name("enc", l, "fwd"), in, he);
      if (cfg_.encoder == EncoderDirection::Bi) add_lstm(params_, layer_name("enc", l, "bwd"), in, he);
    }
    for (int l = 0; l < cfg_.decoder_layers; ++l) add_lstm(params_, layer_name("dec", l, ""), l == 0 ? d + h : h, h);
    params_.add("att.W", h, h);
    params_.add("out.W1", h, 2 * h);
    params_.add("out.W2", cfg_.target_vocab, h);
    bind();
  }

  Seq2Seq(const Seq2Seq& other) : cfg_(other.cfg_), params_(other.params_) { bind(); }
  Seq2Seq& operator=(const Seq2Seq& other) {
    if (this != &other) {
      cfg_ = other.cfg_;
      params_ = other.params_;
      bind();
    }
    return *this;
  }

  const ModelConfig& config() const { return cfg_; }
  ParameterSet<Scalar>& parameters() { return params_; }
  const ParameterSet<Scalar>& parameters() const { return params_; }
  const ContextParams<Scalar>& context() const { return ctx_; }

  /// Uniform [-range, range] for every tensor, then forget-gate biases set to 1.
  void initialize(Rng& rng, double range = 0.1) {
    std::uniform_real_distribution<double> dist(-range, range);
    params_.for_each([&](Parameter<Scalar>& p) {
      for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<Scalar>(dist(rng));
    });
    params_.for_each([](Parameter<Scalar>& p) {
      if (p.name.size() > 2 && p.name.ends_with(".b")) {
        const Index h = p.rows() / 4;
        p.value.middleRows(h, h).setOnes();
      }
    });
  }

  /// Stacked encoder over the context-aware embeddings. Dropout (when rng is
  /// given) is applied to the input of every layer above the first.
  EncoderStates<Scalar> encode(Graph<Scalar>& g, const TokenColumns& x, Rng* dropout_rng = nullptr) const {
    if (x.empty()) throw DomainError("encode: empty source sentence");
    std::vector<Expr<Scalar>> inputs = contextual_embed_sequence(g, ctx_, x);
    EncoderStates<Scalar> enc;
    const std::size_t n = x.size();
    for (int l = 0; l < cfg_.encoder_layers; ++l) {
      if (l > 0 && dropout_rng)
        for (auto& e : inputs) e = dropout(e, cfg_.dropout, *dropout_rng);
      auto fwd = run_lstm<Scalar>(g, enc_fwd_[l], inputs, false);
      std::vector<Expr<Scalar>> outputs(n);
      if (cfg_.encoder == EncoderDirection::Bi) {
        auto bwd = run_lstm<Scalar>(g, enc_bwd_[l], inputs, true);
        for (std::size_t t = 0; t < n; ++t) outputs[t] = concat_rows(fwd[t].h, bwd[t].h);
        enc.finals.push_back({concat_rows(fwd[n - 1].h, bwd[0].h), concat_rows(fwd[n - 1].c, bwd[0].c)});
      } else {
        for (std::size_t t = 0; t < n; ++t) outputs[t] = fwd[t].h;
        enc.finals.push_back(fwd[n - 1]);
      }
      inputs = std::move(outputs);
    }
    enc.states = std::move(inputs);
    auto w_att = g.parameter(*att_);
    for (const auto& h : enc.states) enc.keys.push_back(matmul(w_att, h));
    return enc;
  }

  /// Decoder layer l starts from encoder layer l's final state (zero when the
  /// encoder is shallower); the fed attentional vector starts at zero.
  DecoderState<Scalar> initial_state(Graph<Scalar>& g, const EncoderStates<Scalar>& enc) const {
    const Index batch = enc.states.front().cols();
    DecoderState<Scalar> s;
    for (int l = 0; l < cfg_.decoder_layers; ++l) {
      if (static_cast<std::size_t>(l) < enc.finals.size())
        s.layers.push_back(enc.finals[l]);
      else
        s.layers.push_back(zero_state(g, cfg_.decoder_hidden, batch));
    }
    s.feed = g.constant(Tensor<Scalar>::Zero(cfg_.decoder_hidden, batch));
    return s;
  }

  /// One decoder step. Attention is driven by the previous top-layer state;
  /// the bottom layer reads [f_d(y_prev) ; g-hat_{t-1}].
  StepOutput<Scalar> decode_step(Graph<Scalar>& g, const DecoderState<Scalar>& state, std::span<const int> y_prev,
                                 const EncoderStates<Scalar>& enc, Rng* dropout_rng = nullptr) const {
    for (int y : y_prev)
      if (y < 0 || y >= cfg_.target_vocab)
        throw ContractError("decode_step: target token " + std::to_string(y) + " outside vocabulary of " +
                            std::to_string(cfg_.target_vocab));
    auto att = attention(state.top(), enc.keys, enc.states);
    StepOutput<Scalar> out;
    Expr<Scalar> input = concat_rows(lookup(g, *tgt_embed_, y_prev), state.feed);
    for (int l = 0; l < cfg_.decoder_layers; ++l) {
      if (l > 0 && dropout_rng) input = dropout(input, cfg_.dropout, *dropout_rng);
      auto s = lstm_cell(g, dec_[l], input, state.layers[l]);
      out.state.layers.push_back(s);
      input = s.h;
    }
    out.attentional = tanh(matmul(g.parameter(*w1_), concat_rows(input, att.context)));
    out.logits = matmul(g.parameter(*w2_), out.attentional);
    out.attention = att.weights;
    out.state.feed = out.attentional;
    return out;
  }

  /// Teacher-forced summed cross-entropy of a batch. Each target sentence is
  /// wrapped as [bos, y_1 .. y_m, eos]; m + 1 tokens are predicted per sentence.
  Expr<Scalar> forward_loss(Graph<Scalar>& g, const TokenColumns& x, const TokenColumns& y,
                            Rng* dropout_rng = nullptr) const {
    if (y.size() < 2) throw ContractError("forward_loss: target must hold at least bos and eos");
    auto enc = encode(g, x, dropout_rng);
    auto state = initial_state(g, enc);
    std::vector<Expr<Scalar>> losses;
    for (std::size_t t = 0; t + 1 < y.size(); ++t) {
      auto step = decode_step(g, state, y[t], enc, dropout_rng);
      losses.push_back(sum(cross_entropy(step.logits, std::span<const int>(y[t + 1]))));
      state = std::move(step.state);
    }
    return add_n<Scalar>(losses);
  }

 private:
  static std::string layer_name(const char* part, int layer, const char* dir) {
    std::string s = std::string(part) + ".l" + std::to_string(layer);
    if (*dir) s += std::string(".") + dir;
    return s;
  }

  void bind() {
    enc_fwd_.clear();
    enc_bwd_.clear();
    dec_.clear();
    for (int l = 0; l < cfg_.encoder_layers; ++l) {
      enc_fwd_.push_back(lstm_weights(params_, layer_name("enc", l, "fwd")));
      if (cfg_.encoder == EncoderDirection::Bi) enc_bwd_.push_back(lstm_weights(params_, layer_name("enc", l, "bwd")));
    }
    for (int l = 0; l < cfg_.decoder_layers; ++l) dec_.push_back(lstm_weights(params_, layer_name("dec", l, "")));
    tgt_embed_ = &params_.at("tgt.embed");
    att_ = &params_.at("att.W");
    w1_ = &params_.at("out.W1");
    w2_ = &params_.at("out.W2");
    ctx_ = context_params(params_, cfg_.context_shape(), "src.embed", special::kHeldOut);
  }

  ModelConfig cfg_;
  ParameterSet<Scalar> params_;
  ContextParams<Scalar> ctx_;
  std::vector<LstmWeights<Scalar>> enc_fwd_, enc_bwd_, dec_;
  Parameter<Scalar>* tgt_embed_ = nullptr;
  Parameter<Scalar>* att_ = nullptr;
  Parameter<Scalar>* w1_ = nullptr;
  Parameter<Scalar>* w2_ = nullptr;
};

/// Summed cross-entropy and predicted-token count of a single pair, evaluated
/// without recording gradients. `target` excludes bos/eos.
template <typename Scalar>
std::pair<double, std::size_t> sentence_loss(const Seq2Seq<Scalar>& model, const std::vector<int>& source,
                                             const std::vector<int>& target) {
  std::vector<int> y{special::kBos};
  y.insert(y.end(), target.begin(), target.end());
  y.push_back(special::kEos);
  Graph<Scalar> g(false);
  auto loss = model.forward_loss(g, to_columns({source}), to_columns({y}));
  return {static_cast<double>(loss.value()(0, 0)), y.size() - 1};
}

}  // namespace ctxnmt
