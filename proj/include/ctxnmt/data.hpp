#pragma once

// Corpus ingestion, vocabularies and the synthetic homograph corpus.
//
// Corpora are expected to be tokenized already: one sentence per line,
// tokens separated by whitespace.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxnmt/special_tokens.hpp"

namespace ctxnmt {

using Sentence = std::vector<std::string>;

/// Token <-> index map. Ids 0..4 are the reserved symbols of special_tokens.hpp;
/// ordinary tokens follow in rank order.
class Vocabulary {
 public:
  Vocabulary();

  /// Builds from ordinary tokens in rank order (no reserved spellings).
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  /// Unknown tokens, and reserved spellings appearing as text, map to <unk>.
  int index(std::string_view token) const;
  const std::string& token(int id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const Sentence& words) const;
  /// Drops pad/bos/eos; other ids are rendered by their spelling.
  Sentence decode(const std::vector<int>& ids) const;

  /// One token per line, reserved symbols first.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Keeps the `limit` most frequent tokens; ties go to the lexicographically
/// smaller token. Throws DomainError on an empty corpus.
Vocabulary build_vocab(const std::vector<Sentence>& side, std::size_t limit);

struct ParallelCorpus {
  std::vector<Sentence> source;
  std::vector<Sentence> target;

  std::size_t size() const { return source.size(); }
};

/// Reads whitespace-tokenized lines. Empty lines are an IngestError unless allow_empty.
std::vector<Sentence> read_sentences(const std::filesystem::path& path, bool allow_empty = false);
void write_sentences(const std::filesystem::path& path, const std::vector<Sentence>& sentences);
std::string join(const Sentence& words);
Sentence split(std::string_view line);

/// Reads both sides and checks they have matching line counts and no empty sentences.
ParallelCorpus read_parallel(const std::filesystem::path& source, const std::filesystem::path& target);

/// A pair of index sequences. `target` is wrapped as [bos, ..., eos].
struct IndexedPair {
  std::vector<int> source;
  std::vector<int> target;

  std::size_t source_length() const { return source.size(); }
  /// Target words, excluding the bos/eos wrap.
  std::size_t target_length() const { return target.size() - 2; }
};

using IndexedCorpus = std::vector<IndexedPair>;

IndexedCorpus index_corpus(const ParallelCorpus& corpus, const Vocabulary& source_vocab,
                           const Vocabulary& target_vocab);

/// Ambiguous source words with cue-determined translations.
struct HomographSpec {
  struct Sense {
    std::string cue;         // source word that selects this sense
    std::string cue_target;  // translation of the cue itself
    std::string target;      // translation of the homograph under this sense
  };
  struct Homograph {
    std::string word;
    std::vector<Sense> senses;
  };

  std::vector<Homograph> homographs;
  /// Filler words and their translations; disjoint from cues and homographs.
  std::vector<std::pair<std::string, std::string>> fillers;
  std::size_t min_length = 6;
  std::size_t max_length = 12;
  std::uint64_t seed = 1;

  /// Eight homographs with two senses each and 60 fillers.
  static HomographSpec standard(std::uint64_t seed = 1);
  /// Throws ConfigError on colliding targets, cue/homograph overlap and similar defects.
  void validate() const;
};

struct SenseLabel {
  std::size_t line = 0;
  std::string homograph;
  std::string gold_target;
};

struct SyntheticCorpus {
  ParallelCorpus corpus;
  std::vector<SenseLabel> labels;
};

/// Every sentence holds one homograph and one cue for one of its senses,
/// placed before or after the homograph with equal probability, among
/// fillers. The target is the word-by-word translation. (homograph, sense)
/// combinations are drawn in shuffled rounds so every combination occurs
/// floor(n / K) or ceil(n / K) times.
SyntheticCorpus gen_homograph_corpus(const HomographSpec& spec, std::size_t n_pairs);

/// Sidecar TSV: line_index, homograph, gold_target.
void write_labels(const std::filesystem::path& path, const std::vector<SenseLabel>& labels);
std::vector<SenseLabel> read_labels(const std::filesystem::path& path);

/// Reads one word per line (homograph lists, stop words); blank lines and # comments skipped.
std::vector<std::string> read_word_list(const std::filesystem::path& path);

}  // namespace ctxnmt
