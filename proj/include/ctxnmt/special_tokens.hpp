#pragma once

#include <array>
#include <string_view>

namespace ctxnmt {

/// Reserved vocabulary ids shared by every vocabulary, source and target.
namespace special {
inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kBos = 2;
inline constexpr int kEos = 3;
/// Replaces the word whose context the held-out LSTM is computing. Never produced by tokenization.
inline constexpr int kHeldOut = 4;
inline constexpr int kCount = 5;

inline constexpr std::array<std::string_view, kCount> kSpellings = {"<pad>", "<unk>", "<s>", "</s>", "<$>"};
}  // namespace special

}  // namespace ctxnmt
