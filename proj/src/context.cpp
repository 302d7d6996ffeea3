#include "ctxnmt/context.hpp"

namespace ctxnmt {

std::string_view to_string(ContextKind kind) {
  switch (kind) {
    case ContextKind::None: return "none";
    case ContextKind::NBOW: return "nbow";
    case ContextKind::BiLSTM: return "bilstm";
    case ContextKind::HoLSTM: return "holstm";
  }
  return "?";
}

std::string_view to_string(IntegrationKind kind) {
  return kind == IntegrationKind::Gate ? "gate" : "concat";
}

ContextKind parse_context_kind(std::string_view text) {
  if (text == "none") return ContextKind::None;
  if (text == "nbow") return ContextKind::NBOW;
  if (text == "bilstm") return ContextKind::BiLSTM;
  if (text == "holstm") return ContextKind::HoLSTM;
  throw ConfigError("context must be none|nbow|bilstm|holstm, got '" + std::string(text) + "'");
}

IntegrationKind parse_integration_kind(std::string_view text) {
  if (text == "gate") return IntegrationKind::Gate;
  if (text == "concat") return IntegrationKind::Concat;
  throw ConfigError("integration must be gate|concat, got '" + std::string(text) + "'");
}

TokenColumns to_columns(const std::vector<std::vector<int>>& sentences) {
  if (sentences.empty()) return {};
  const std::size_t n = sentences.front().size();
  TokenColumns cols(n, std::vector<int>(sentences.size()));
  for (std::size_t b = 0; b < sentences.size(); ++b) {
    if (sentences[b].size() != n) throw ShapeError("to_columns: sentences of a batch must share one length");
    for (std::size_t t = 0; t < n; ++t) cols[t][b] = sentences[b][t];
  }
  return cols;
}

Index ContextShape::context_dim() const {
  switch (kind) {
    case ContextKind::None: return 0;
    case ContextKind::NBOW: return embed_dim;
    case ContextKind::BiLSTM: return 2 * bilstm_hidden_size();
    case ContextKind::HoLSTM: return embed_dim;
  }
  return 0;
}

void ContextShape::validate() const {
  if (embed_dim <= 0) throw ConfigError("embed_dim must be positive");
  if (kind == ContextKind::None) return;
  if (kind == ContextKind::BiLSTM && bilstm_hidden_size() <= 0)
    throw ConfigError("BiLSTM context hidden size must be positive");
  if (integration == IntegrationKind::Gate && context_dim() != embed_dim)
    throw ConfigError("gate integration needs a context of dimension " + std::to_string(embed_dim) + ", " +
                      std::string(to_string(kind)) + " produces " + std::to_string(context_dim()));
}

}  // namespace ctxnmt
