#include "ctxnmt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "ctxnmt/errors.hpp"
#include "ctxnmt/tensor.hpp"
#include "json.hpp"

namespace ctxnmt {

// ---------------------------------------------------------------- BLEU

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const Sentence& s, int n) {
  NgramCounts counts;
  const auto len = static_cast<int>(s.size());
  for (int i = 0; i + n <= len; ++i) ++counts[std::vector<std::string>(s.begin() + i, s.begin() + i + n)];
  return counts;
}

}  // namespace

double bleu(const std::vector<Sentence>& references, const std::vector<Sentence>& hypotheses, int max_n) {
  if (references.size() != hypotheses.size())
    throw ContractError("bleu: " + std::to_string(references.size()) + " references but " +
                        std::to_string(hypotheses.size()) + " hypotheses");
  if (max_n < 1) throw ContractError("bleu: max_n must be at least 1");
  std::vector<double> matches(static_cast<std::size_t>(max_n), 0.0), totals(static_cast<std::size_t>(max_n), 0.0);
  double ref_len = 0.0, hyp_len = 0.0;
  for (std::size_t k = 0; k < references.size(); ++k) {
    ref_len += static_cast<double>(references[k].size());
    hyp_len += static_cast<double>(hypotheses[k].size());
    for (int n = 1; n <= max_n; ++n) {
      const auto h = ngrams(hypotheses[k], n);
      const auto r = ngrams(references[k], n);
      for (const auto& [gram, count] : h) {
        auto it = r.find(gram);
        if (it != r.end()) matches[static_cast<std::size_t>(n - 1)] += static_cast<double>(std::min(count, it->second));
        totals[static_cast<std::size_t>(n - 1)] += static_cast<double>(count);
      }
    }
  }
  if (hyp_len == 0.0 || matches[0] == 0.0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < matches.size(); ++n) {
    double num = matches[n], den = totals[n];
    if (n > 0 && num == 0.0) {
      num += 1.0;
      den += 1.0;
    }
    log_sum += std::log(num / den);
  }
  const double bp = hyp_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return bp * std::exp(log_sum / static_cast<double>(max_n));
}

// ---------------------------------------------------------------- alignment

namespace {

std::uint64_t key(std::uint32_t given, std::uint32_t emitted) {
  return (static_cast<std::uint64_t>(given) << 32) | emitted;
}

struct Interned {
  std::vector<std::vector<std::uint32_t>> given, emitted;
};

}  // namespace

double LexicalTable::prob(const std::string& emitted, const std::string& given) const {
  auto g = given_ids_.find(given);
  auto e = emitted_ids_.find(emitted);
  if (g == given_ids_.end() || e == emitted_ids_.end()) return 0.0;
  auto it = table_.find(key(g->second, e->second));
  return it == table_.end() ? 0.0 : it->second;
}

LexicalTable train_aligner(const ParallelCorpus& corpus, int iterations, AlignDirection direction) {
  if (corpus.size() == 0) throw DomainError("train_aligner: empty corpus");
  if (iterations < 1) throw ConfigError("train_aligner: iterations must be at least 1");
  if (corpus.source.size() != corpus.target.size()) throw ContractError("train_aligner: sides differ in length");
  const bool s2t = direction == AlignDirection::SourceToTarget;
  const auto& given_side = s2t ? corpus.source : corpus.target;
  const auto& emitted_side = s2t ? corpus.target : corpus.source;

  LexicalTable t;
  t.direction_ = direction;
  Interned ids;
  auto intern = [](std::unordered_map<std::string, std::uint32_t>& map, const Sentence& s) {
    std::vector<std::uint32_t> out;
    for (const auto& w : s) out.push_back(map.emplace(w, static_cast<std::uint32_t>(map.size())).first->second);
    return out;
  };
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    ids.given.push_back(intern(t.given_ids_, given_side[k]));
    ids.emitted.push_back(intern(t.emitted_ids_, emitted_side[k]));
  }
  const double uniform = 1.0 / static_cast<double>(t.emitted_ids_.size());
  for (std::size_t k = 0; k < corpus.size(); ++k)
    for (auto g : ids.given[k])
      for (auto e : ids.emitted[k]) t.table_[key(g, e)] = uniform;

  auto log_likelihood = [&] {
    long double ll = 0.0L;
    for (std::size_t k = 0; k < corpus.size(); ++k) {
      if (ids.given[k].empty()) continue;
      for (auto e : ids.emitted[k]) {
        long double s = 0.0L;
        for (auto g : ids.given[k]) s += t.table_[key(g, e)];
        ll += std::log(s / static_cast<long double>(ids.given[k].size()));
      }
    }
    return static_cast<double>(ll);
  };

  std::unordered_map<std::uint64_t, double> counts;
  std::vector<double> totals(t.given_ids_.size());
  for (int it = 0; it < iterations; ++it) {
    t.log_likelihood_.push_back(log_likelihood());
    for (auto& [k, v] : counts) v = 0.0;
    std::fill(totals.begin(), totals.end(), 0.0);
    for (std::size_t k = 0; k < corpus.size(); ++k) {
      for (auto e : ids.emitted[k]) {
        double denom = 0.0;
        for (auto g : ids.given[k]) denom += t.table_[key(g, e)];
        if (denom <= 0.0) continue;
        for (auto g : ids.given[k]) {
          const double c = t.table_[key(g, e)] / denom;
          counts[key(g, e)] += c;
          totals[g] += c;
        }
      }
    }
    for (auto& [k, v] : t.table_) {
      const auto g = static_cast<std::uint32_t>(k >> 32);
      v = totals[g] > 0.0 ? counts[k] / totals[g] : 0.0;
    }
  }
  t.log_likelihood_.push_back(log_likelihood());
  return t;
}

Alignment directed_alignment(const Sentence& source, const Sentence& target, const LexicalTable& table,
                             double floor) {
  const bool s2t = table.direction() == AlignDirection::SourceToTarget;
  const Sentence& emitted = s2t ? target : source;
  const Sentence& given = s2t ? source : target;
  Alignment links;
  for (std::size_t j = 0; j < emitted.size(); ++j) {
    double best = 0.0;
    int best_i = -1;
    for (std::size_t i = 0; i < given.size(); ++i) {
      const double p = table.prob(emitted[j], given[i]);
      if (p > best) {
        best = p;
        best_i = static_cast<int>(i);
      }
    }
    if (best_i < 0 || best < floor) continue;
    if (s2t)
      links.emplace(best_i, static_cast<int>(j));
    else
      links.emplace(static_cast<int>(j), best_i);
  }
  return links;
}

Alignment grow_diag_final_and(const Alignment& s2t, const Alignment& t2s, int source_length, int target_length) {
  Alignment uni;
  std::set_union(s2t.begin(), s2t.end(), t2s.begin(), t2s.end(), std::inserter(uni, uni.end()));
  Alignment a;
  std::set_intersection(s2t.begin(), s2t.end(), t2s.begin(), t2s.end(), std::inserter(a, a.end()));

  std::vector<bool> src_aligned(static_cast<std::size_t>(source_length)), tgt_aligned(static_cast<std::size_t>(target_length));
  auto add = [&](int i, int j) {
    a.emplace(i, j);
    src_aligned[static_cast<std::size_t>(i)] = true;
    tgt_aligned[static_cast<std::size_t>(j)] = true;
  };
  for (const auto& [i, j] : a) {
    if (i < 0 || j < 0 || i >= source_length || j >= target_length)
      throw ContractError("grow_diag_final_and: link outside sentence bounds");
    src_aligned[static_cast<std::size_t>(i)] = tgt_aligned[static_cast<std::size_t>(j)] = true;
  }

  static constexpr int kNeighbors[8][2] = {{-1, 0}, {0, -1}, {1, 0}, {0, 1}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
  bool added = true;
  while (added) {
    added = false;
    for (int i = 0; i < source_length; ++i)
      for (int j = 0; j < target_length; ++j) {
        if (!a.count({i, j})) continue;
        for (const auto& nb : kNeighbors) {
          const int ni = i + nb[0], nj = j + nb[1];
          if (ni < 0 || nj < 0 || ni >= source_length || nj >= target_length) continue;
          if ((!src_aligned[static_cast<std::size_t>(ni)] || !tgt_aligned[static_cast<std::size_t>(nj)]) &&
              uni.count({ni, nj}) && !a.count({ni, nj})) {
            add(ni, nj);
            added = true;
          }
        }
      }
  }
  for (const Alignment* directed : {&s2t, &t2s})
    for (const auto& [i, j] : *directed)
      if (!src_aligned[static_cast<std::size_t>(i)] && !tgt_aligned[static_cast<std::size_t>(j)]) add(i, j);
  return a;
}

Alignment align(const Sentence& source, const Sentence& target, const LexicalTable& forward,
                const LexicalTable& backward, double floor) {
  if (forward.direction() != AlignDirection::SourceToTarget || backward.direction() != AlignDirection::TargetToSource)
    throw ContractError("align: expects a source-to-target and a target-to-source table");
  return grow_diag_final_and(directed_alignment(source, target, forward, floor),
                             directed_alignment(source, target, backward, floor), static_cast<int>(source.size()),
                             static_cast<int>(target.size()));
}

std::string to_pharaoh(const Alignment& links) {
  std::string s;
  for (const auto& [i, j] : links) {
    if (!s.empty()) s += ' ';
    s += std::to_string(i) + "-" + std::to_string(j);
  }
  return s;
}

Alignment parse_pharaoh(const std::string& line) {
  Alignment links;
  for (const auto& tok : split(line)) {
    const auto dash = tok.find('-');
    if (dash == std::string::npos || dash == 0 || dash + 1 == tok.size())
      throw IngestError("malformed alignment link '" + tok + "'");
    std::size_t used_i = 0, used_j = 0;
    int i = 0, j = 0;
    try {
      i = std::stoi(tok.substr(0, dash), &used_i);
      j = std::stoi(tok.substr(dash + 1), &used_j);
    } catch (const std::exception&) {
      throw IngestError("malformed alignment link '" + tok + "'");
    }
    if (used_i != dash || used_j != tok.size() - dash - 1 || i < 0 || j < 0)
      throw IngestError("malformed alignment link '" + tok + "'");
    links.emplace(i, j);
  }
  return links;
}

void write_pharaoh(const std::filesystem::path& path, const AlignmentSet& alignments) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write '" + path.string() + "'");
  for (const auto& a : alignments) out << to_pharaoh(a) << '\n';
}

AlignmentSet read_pharaoh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open '" + path.string() + "'");
  AlignmentSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    try {
      out.push_back(parse_pharaoh(line));
    } catch (const IngestError& e) {
      throw IngestError(std::string(e.what()) + " in '" + path.string() + "'", lineno);
    }
  }
  return out;
}

// ---------------------------------------------------------------- word F1

double WordCounts::precision() const { return tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0; }
double WordCounts::recall() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
double WordCounts::f1() const {
  const double p = precision(), r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

namespace {

std::set<std::string> aligned_words(const Alignment& links, int source_pos, const Sentence& target) {
  std::set<std::string> words;
  for (auto it = links.lower_bound({source_pos, std::numeric_limits<int>::min()});
       it != links.end() && it->first == source_pos; ++it) {
    if (it->second < 0 || static_cast<std::size_t>(it->second) >= target.size())
      throw ContractError("word_translation_f1: alignment link points past the target sentence");
    words.insert(target[static_cast<std::size_t>(it->second)]);
  }
  return words;
}

}  // namespace

HomographReport word_translation_f1(const std::vector<TranslationPair>& pairs, const std::vector<std::string>& words,
                                    const std::set<std::string>& stop_words) {
  HomographReport report;
  for (const auto& w : words)
    if (!stop_words.count(w)) report.per_word[w];
  for (const auto& pair : pairs) {
    WordCounts pair_counts;
    for (std::size_t i = 0; i < pair.source.size(); ++i) {
      auto it = report.per_word.find(pair.source[i]);
      if (it == report.per_word.end()) continue;
      const auto ref = aligned_words(pair.reference_alignment, static_cast<int>(i), pair.reference);
      const auto hyp = aligned_words(pair.hypothesis_alignment, static_cast<int>(i), pair.hypothesis);
      WordCounts c;
      for (const auto& h : hyp) (ref.count(h) ? c.tp : c.fp) += 1;
      for (const auto& r : ref)
        if (!hyp.count(r)) c.fn += 1;
      it->second += c;
      pair_counts += c;
    }
    report.per_pair.push_back(pair_counts);
    report.micro += pair_counts;
  }
  return report;
}

std::vector<std::string> source_words(const std::vector<TranslationPair>& pairs) {
  std::set<std::string> all;
  for (const auto& p : pairs) all.insert(p.source.begin(), p.source.end());
  return {all.begin(), all.end()};
}

// ---------------------------------------------------------------- buckets

std::map<std::string, int> SenseDictionary::read_senses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open '" + path.string() + "'");
  std::map<std::string, int> senses;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw IngestError("sense dictionary: expected word<TAB>count", lineno);
    int count = 0;
    try {
      count = std::stoi(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw IngestError("sense dictionary: bad count", lineno);
    }
    if (count < 1) throw IngestError("sense dictionary: counts must be at least 1", lineno);
    senses[line.substr(0, tab)] = count;
  }
  return senses;
}

BucketReport sense_bucket_report(const std::map<std::string, double>& per_word_f1, const SenseDictionary& dict) {
  std::map<int, std::pair<double, std::size_t>> sums;
  for (const auto& [word, f1] : per_word_f1) {
    if (dict.stop_words.count(word)) continue;
    auto it = dict.senses.find(word);
    if (it == dict.senses.end()) continue;
    auto& s = sums[it->second];
    s.first += f1;
    s.second += 1;
  }
  if (sums.empty()) throw DomainError("sense_bucket_report: no scored word has a known sense count");
  BucketReport out;
  for (const auto& [senses, s] : sums) out.buckets.push_back({senses, s.second, s.first / static_cast<double>(s.second)});
  const std::size_t window = std::min<std::size_t>(4, out.buckets.size());
  for (std::size_t i = 0; i + window <= out.buckets.size(); ++i) {
    double m = 0.0;
    for (std::size_t k = i; k < i + window; ++k) m += out.buckets[k].mean_f1;
    out.series.push_back(m / static_cast<double>(window));
  }
  return out;
}

// ---------------------------------------------------------------- bootstrap

double bootstrap_compare(const HomographReport& a, const HomographReport& b, std::size_t resamples,
                         std::uint64_t seed) {
  const std::size_t n = a.per_pair.size();
  if (b.per_pair.size() != n) throw ContractError("bootstrap_compare: reports cover different sentence pairs");
  if (n < 2) throw DomainError("bootstrap_compare: need at least two sentence pairs");
  if (resamples < 1) throw ConfigError("bootstrap_compare: resamples must be positive");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  double not_better = 0.0;
  for (std::size_t r = 0; r < resamples; ++r) {
    WordCounts ca, cb;
    for (std::size_t k = 0; k < n; ++k) {
      const auto i = pick(rng);
      ca += a.per_pair[i];
      cb += b.per_pair[i];
    }
    const double fa = ca.f1(), fb = cb.f1();
    if (fb < fa)
      not_better += 1.0;
    else if (fb == fa)
      not_better += 0.5;
  }
  return not_better / static_cast<double>(resamples);
}

// ---------------------------------------------------------------- output

namespace {

void write_row(std::ostream& out, const std::string& label, const WordCounts& c) {
  out << label << '\t' << c.tp << '\t' << c.fp << '\t' << c.fn << '\t' << c.precision() << '\t' << c.recall() << '\t'
      << c.f1() << '\n';
}

}  // namespace

void write_report_tsv(std::ostream& out, const HomographReport& report, const BucketReport* buckets) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::fixed << std::setprecision(6);
  out << "word\tTP\tFP\tFN\tP\tR\tF1\n";
  for (const auto& [w, c] : report.per_word) write_row(out, w, c);
  write_row(out, "#micro", report.micro);
  if (buckets) {
    for (const auto& b : buckets->buckets)
      out << "#senses\t" << b.senses << '\t' << b.words << '\t' << b.mean_f1 << '\n';
    for (std::size_t i = 0; i < buckets->series.size(); ++i) out << "#bucket\t" << i << '\t' << buckets->series[i] << '\n';
  }
  out.flags(flags);
  out.precision(prec);
}

void write_report_json(std::ostream& out, const HomographReport& report, const BucketReport* buckets) {
  auto counts = [](const WordCounts& c) {
    return nlohmann::json{{"TP", c.tp}, {"FP", c.fp}, {"FN", c.fn}, {"P", c.precision()}, {"R", c.recall()}, {"F1", c.f1()}};
  };
  nlohmann::json j;
  j["words"] = nlohmann::json::object();
  for (const auto& [w, c] : report.per_word) j["words"][w] = counts(c);
  j["micro"] = counts(report.micro);
  if (buckets) {
    j["buckets"] = nlohmann::json::array();
    for (const auto& b : buckets->buckets) j["buckets"].push_back({{"senses", b.senses}, {"words", b.words}, {"mean_f1", b.mean_f1}});
    j["series"] = buckets->series;
  }
  out << j.dump(2) << '\n';
}

std::map<std::string, WordCounts> read_report_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open '" + path.string() + "'");
  std::map<std::string, WordCounts> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (!line.starts_with("word\tTP\tFP\tFN")) throw IngestError("report '" + path.string() + "': missing header", 1);
      continue;
    }
    if (line.empty() || line.front() == '#') continue;
    std::istringstream is(line);
    std::string word;
    WordCounts c;
    if (!std::getline(is, word, '\t') || !(is >> c.tp >> c.fp >> c.fn))
      throw IngestError("report '" + path.string() + "': malformed row", lineno);
    rows[word] = c;
  }
  return rows;
}

}  // namespace ctxnmt
