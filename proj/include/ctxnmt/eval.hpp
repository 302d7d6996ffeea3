#pragma once

// Translation quality measurements: corpus BLEU, an IBM Model 1 word aligner
// with grow-diag-final-and symmetrization, alignment-based word translation
// precision/recall/F1, sense-count bucketing and paired bootstrap resampling.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ctxnmt/data.hpp"

namespace ctxnmt {

// ---------------------------------------------------------------- BLEU

/// Corpus BLEU in [0, 1]: geometric mean of clipped n-gram precisions for
/// n = 1..max_n times the brevity penalty. For n >= 2 a zero match count is
/// smoothed to (0 + 1) / (total + 1). Throws ContractError when the two sides
/// have different line counts.
double bleu(const std::vector<Sentence>& references, const std::vector<Sentence>& hypotheses, int max_n = 4);

// ---------------------------------------------------------------- alignment

/// SourceToTarget estimates t(target word | source word), used to link every
/// target position to a source position; TargetToSource is the reverse.
enum class AlignDirection { SourceToTarget, TargetToSource };

/// Lexical translation table t(emitted | given) from IBM Model 1 EM.
class LexicalTable {
 public:
  double prob(const std::string& emitted, const std::string& given) const;
  AlignDirection direction() const { return direction_; }
  /// Corpus log-likelihood before each iteration and after the last one.
  const std::vector<double>& log_likelihood() const { return log_likelihood_; }

 private:
  friend LexicalTable train_aligner(const ParallelCorpus&, int, AlignDirection);
  AlignDirection direction_ = AlignDirection::SourceToTarget;
  std::unordered_map<std::string, std::uint32_t> given_ids_, emitted_ids_;
  std::unordered_map<std::uint64_t, double> table_;
  std::vector<double> log_likelihood_;
};

/// IBM Model 1: uniform start, expected counts, renormalization. No NULL word.
LexicalTable train_aligner(const ParallelCorpus& corpus, int iterations, AlignDirection direction);

/// Set of (source position, target position) links, 0-based.
using Alignment = std::set<std::pair<int, int>>;
using AlignmentSet = std::vector<Alignment>;

inline constexpr double kNullAlignmentFloor = 1e-6;

/// Links each target position (SourceToTarget table) or each source position
/// (TargetToSource table) to its most probable counterpart; ties go to the
/// lower position and links below the floor are dropped.
Alignment directed_alignment(const Sentence& source, const Sentence& target, const LexicalTable& table,
                             double floor = kNullAlignmentFloor);

/// Symmetrizes two directed alignments; the result contains their
/// intersection and is contained in their union.
Alignment grow_diag_final_and(const Alignment& source_to_target, const Alignment& target_to_source,
                              int source_length, int target_length);

/// Both directed alignments symmetrized with grow-diag-final-and.
Alignment align(const Sentence& source, const Sentence& target, const LexicalTable& forward,
                const LexicalTable& backward, double floor = kNullAlignmentFloor);

std::string to_pharaoh(const Alignment& links);
Alignment parse_pharaoh(const std::string& line);
void write_pharaoh(const std::filesystem::path& path, const AlignmentSet& alignments);
AlignmentSet read_pharaoh(const std::filesystem::path& path);

// ---------------------------------------------------------------- word F1

struct TranslationPair {
  Sentence source;
  Sentence reference;
  Sentence hypothesis;
  Alignment reference_alignment;
  Alignment hypothesis_alignment;
};

struct WordCounts {
  std::size_t tp = 0, fp = 0, fn = 0;

  /// 0 when the denominator is 0.
  double precision() const;
  double recall() const;
  double f1() const;
  WordCounts& operator+=(const WordCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const WordCounts&) const = default;
};

struct HomographReport {
  std::map<std::string, WordCounts> per_word;
  WordCounts micro;
  /// Counts of each sentence pair over the listed words, for resampling.
  std::vector<WordCounts> per_pair;
};

/// For every occurrence of a listed source word, compares the set R of
/// reference words aligned to it with the set H of hypothesis words aligned to
/// it: TP = |R n H|, FP = |H \ R|, FN = |R \ H|. Counts are pooled per word and
/// over all occurrences (micro average). Stop words are skipped; listed words
/// that never occur get zero counts.
HomographReport word_translation_f1(const std::vector<TranslationPair>& pairs, const std::vector<std::string>& words,
                                    const std::set<std::string>& stop_words = {});

/// Every distinct source word of the pairs, sorted.
std::vector<std::string> source_words(const std::vector<TranslationPair>& pairs);

// ---------------------------------------------------------------- buckets

struct SenseDictionary {
  std::map<std::string, int> senses;
  std::set<std::string> stop_words;

  /// TSV `word<TAB>count`; counts must be >= 1.
  static std::map<std::string, int> read_senses(const std::filesystem::path& path);
};

struct SenseBucket {
  int senses = 0;
  std::size_t words = 0;
  double mean_f1 = 0.0;
};

struct BucketReport {
  std::vector<SenseBucket> buckets;  // non-empty buckets, ascending sense count
  /// Mean of each run of four consecutive buckets; a single value over all
  /// buckets when fewer than four exist.
  std::vector<double> series;
};

/// Groups words by exact sense count and smooths bucket means over windows of
/// four. Throws DomainError when no word has a known sense count.
BucketReport sense_bucket_report(const std::map<std::string, double>& per_word_f1, const SenseDictionary& dict);

// ---------------------------------------------------------------- bootstrap

/// Paired bootstrap over sentence pairs: the fraction of resamples in which
/// system B's micro-F1 is not above system A's, ties counted as one half.
double bootstrap_compare(const HomographReport& a, const HomographReport& b, std::size_t resamples = 1000,
                         std::uint64_t seed = 1);

// ---------------------------------------------------------------- output

/// TSV: header, one row per word, a #micro row, then #bucket rows when given.
void write_report_tsv(std::ostream& out, const HomographReport& report, const BucketReport* buckets = nullptr);
void write_report_json(std::ostream& out, const HomographReport& report, const BucketReport* buckets = nullptr);
/// Reads back the per-word rows of a TSV report.
std::map<std::string, WordCounts> read_report_tsv(const std::filesystem::path& path);

}  // namespace ctxnmt
