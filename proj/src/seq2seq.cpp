#include "ctxnmt/seq2seq.hpp"

namespace ctxnmt {

std::string_view to_string(EncoderDirection dir) { return dir == EncoderDirection::Bi ? "bi" : "uni"; }

EncoderDirection parse_encoder_direction(std::string_view text) {
  if (text == "bi") return EncoderDirection::Bi;
  if (text == "uni") return EncoderDirection::Uni;
  throw ConfigError("encoder must be uni|bi, got '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  if (embed_dim <= 0) throw ConfigError("embed_dim must be positive");
  if (decoder_hidden <= 0) throw ConfigError("hidden must be positive");
  if (encoder == EncoderDirection::Bi && decoder_hidden % 2 != 0)
    throw ConfigError("a bi-directional encoder needs an even hidden size");
  if (encoder_layers < 1 || decoder_layers < 1) throw ConfigError("layer counts must be at least 1");
  if (source_vocab <= special::kHeldOut) throw ConfigError("source vocabulary must include the reserved symbols");
  if (target_vocab < 1) throw ConfigError("target vocabulary must be non-empty");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  context_shape().validate();
}

namespace {

std::size_t lstm_count(Index in, Index h) { return static_cast<std::size_t>(4 * h * in + 4 * h * h + 4 * h); }

}  // namespace

std::size_t parameter_count(const ModelConfig& cfg) {
  cfg.validate();
  const Index d = cfg.embed_dim, h = cfg.decoder_hidden, he = cfg.encoder_hidden();
  std::size_t n = static_cast<std::size_t>(cfg.source_vocab * d + cfg.target_vocab * d);
  const auto shape = cfg.context_shape();
  switch (cfg.context) {
    case ContextKind::None:
    case ContextKind::NBOW:
      break;
    case ContextKind::BiLSTM:
      n += 2 * lstm_count(d, shape.bilstm_hidden_size());
      break;
    case ContextKind::HoLSTM:
      n += lstm_count(d, d);
      break;
  }
  if (cfg.context != ContextKind::None && cfg.integration == IntegrationKind::Concat)
    n += static_cast<std::size_t>(d * (d + shape.context_dim()));
  const std::size_t dirs = cfg.encoder == EncoderDirection::Bi ? 2 : 1;
  for (int l = 0; l < cfg.encoder_layers; ++l) n += dirs * lstm_count(l == 0 ? d : h, he);
  for (int l = 0; l < cfg.decoder_layers; ++l) n += lstm_count(l == 0 ? d + h : h, h);
  n += static_cast<std::size_t>(h * h + h * 2 * h + cfg.target_vocab * h);
  return n;
}

}  // namespace ctxnmt
