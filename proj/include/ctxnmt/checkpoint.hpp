#pragma once

// Binary checkpoint, version 1. All integers are little-endian uint64.
//
//   magic      8 bytes  "CTXNMT\0\1"
//   scalar     uint64   4 (float) or 8 (double)
//   config     uint64 length + text   (model_config_text)
//   src vocab  uint64 length + text   (one token per line)
//   tgt vocab  uint64 length + text
//   tensors    uint64 count, then per tensor:
//              uint64 name length, name, uint64 rows, uint64 cols,
//              rows * cols scalars in column-major order
//
// Tensors appear in parameter registration order.

#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ctxnmt/config.hpp"
#include "ctxnmt/data.hpp"
#include "ctxnmt/seq2seq.hpp"

namespace ctxnmt {

inline constexpr std::array<char, 8> kCheckpointMagic{'C', 'T', 'X', 'N', 'M', 'T', '\0', '\1'};

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw IngestError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_text(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_text(std::istream& in, std::uint64_t limit = 1ull << 32) {
  const auto n = get_u64(in);
  if (n > limit) throw IngestError("checkpoint: implausible field length");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw IngestError("checkpoint truncated");
  return s;
}

inline std::string vocab_text(const Vocabulary& v) {
  std::string s;
  for (const auto& t : v.tokens()) s += t + '\n';
  return s;
}

inline Vocabulary vocab_from_text(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> tokens;
  std::string line;
  std::size_t k = 0;
  while (std::getline(in, line)) {
    if (k < special::kCount && line != special::kSpellings[k])
      throw IngestError("checkpoint: vocabulary lacks reserved symbols");
    if (k++ >= special::kCount) tokens.push_back(line);
  }
  return Vocabulary::from_tokens(tokens);
}

}  // namespace detail

template <typename Scalar>
struct Checkpoint {
  Seq2Seq<Scalar> model;
  Vocabulary source_vocab;
  Vocabulary target_vocab;
};

/// Scalar width stored in a checkpoint file, without loading it.
inline std::size_t checkpoint_scalar_size(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open checkpoint '" + path.string() + "'");
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), 8) || magic != kCheckpointMagic)
    throw IngestError("'" + path.string() + "' is not a checkpoint");
  return detail::get_u64(in);
}

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const Seq2Seq<Scalar>& model, const Vocabulary& src,
                     const Vocabulary& tgt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestError("cannot write checkpoint '" + path.string() + "'");
  out.write(kCheckpointMagic.data(), 8);
  detail::put_u64(out, sizeof(Scalar));
  detail::put_text(out, model_config_text(model.config()));
  detail::put_text(out, detail::vocab_text(src));
  detail::put_text(out, detail::vocab_text(tgt));
  const auto& params = model.parameters();
  detail::put_u64(out, params.size());
  params.for_each([&](const Parameter<Scalar>& p) {
    detail::put_text(out, p.name);
    detail::put_u64(out, static_cast<std::uint64_t>(p.rows()));
    detail::put_u64(out, static_cast<std::uint64_t>(p.cols()));
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(sizeof(Scalar) * static_cast<std::size_t>(p.value.size())));
  });
  if (!out) throw IngestError("failed writing checkpoint '" + path.string() + "'");
}

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::filesystem::path& path) {
  const auto scalar = checkpoint_scalar_size(path);
  if (scalar != sizeof(Scalar))
    throw IngestError("checkpoint '" + path.string() + "' stores " + std::to_string(scalar) + "-byte scalars");
  std::ifstream in(path, std::ios::binary);
  in.seekg(16);
  try {
    const auto cfg = parse_model_config_text(detail::get_text(in));
    Vocabulary src = detail::vocab_from_text(detail::get_text(in));
    Vocabulary tgt = detail::vocab_from_text(detail::get_text(in));
    if (static_cast<Index>(src.size()) != cfg.source_vocab || static_cast<Index>(tgt.size()) != cfg.target_vocab)
      throw IngestError("vocabulary sizes disagree with the stored configuration");
    Seq2Seq<Scalar> model(cfg);
    auto& params = model.parameters();
    if (detail::get_u64(in) != params.size()) throw IngestError("tensor count differs from the configuration");
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = params[k];
      const auto name = detail::get_text(in, 4096);
      const auto rows = detail::get_u64(in), cols = detail::get_u64(in);
      if (name != p.name || rows != static_cast<std::uint64_t>(p.rows()) || cols != static_cast<std::uint64_t>(p.cols()))
        throw IngestError("tensor '" + name + "' does not match the configuration (expected '" + p.name + "')");
      if (!in.read(reinterpret_cast<char*>(p.value.data()),
                   static_cast<std::streamsize>(sizeof(Scalar) * static_cast<std::size_t>(p.value.size()))))
        throw IngestError("checkpoint truncated");
    }
    if (in.peek() != std::char_traits<char>::eof()) throw IngestError("trailing bytes");
    return Checkpoint<Scalar>{std::move(model), std::move(src), std::move(tgt)};
  } catch (const IngestError& e) {
    throw IngestError("checkpoint '" + path.string() + "': " + e.what());
  } catch (const ConfigError& e) {
    throw IngestError("checkpoint '" + path.string() + "': " + e.what());
  }
}

}  // namespace ctxnmt
