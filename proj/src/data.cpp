#include "ctxnmt/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "ctxnmt/errors.hpp"
#include "ctxnmt/tensor.hpp"

namespace ctxnmt {

namespace {

bool is_reserved(std::string_view token) {
  return std::find(special::kSpellings.begin(), special::kSpellings.end(), token) != special::kSpellings.end();
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

Vocabulary::Vocabulary() {
  for (auto s : special::kSpellings) {
    ids_.emplace(std::string(s), static_cast<int>(tokens_.size()));
    tokens_.emplace_back(s);
  }
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  for (const auto& t : tokens) {
    if (is_reserved(t)) throw ContractError("vocabulary: '" + t + "' is a reserved symbol");
    if (!v.ids_.emplace(t, static_cast<int>(v.tokens_.size())).second)
      throw ContractError("vocabulary: duplicate token '" + t + "'");
    v.tokens_.push_back(t);
  }
  return v;
}

int Vocabulary::index(std::string_view token) const {
  if (is_reserved(token)) return special::kUnk;
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? special::kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw ContractError("vocabulary: id " + std::to_string(id) + " outside [0, " + std::to_string(tokens_.size()) + ")");
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const {
  return !is_reserved(token) && ids_.count(std::string(token)) != 0;
}

std::vector<int> Vocabulary::encode(const Sentence& words) const {
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(index(w));
  return ids;
}

Sentence Vocabulary::decode(const std::vector<int>& ids) const {
  Sentence words;
  for (int id : ids) {
    if (id == special::kPad || id == special::kBos || id == special::kEos) continue;
    words.push_back(token(id));
  }
  return words;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  auto out = open_out(path);
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  if (lines.size() < static_cast<std::size_t>(special::kCount))
    throw IngestError("vocabulary '" + path.string() + "' is missing the reserved symbols");
  for (int i = 0; i < special::kCount; ++i)
    if (lines[static_cast<std::size_t>(i)] != special::kSpellings[static_cast<std::size_t>(i)])
      throw IngestError("vocabulary '" + path.string() + "': expected reserved symbol '" +
                            std::string(special::kSpellings[static_cast<std::size_t>(i)]) + "'",
                        static_cast<std::size_t>(i) + 1);
  try {
    return from_tokens(std::vector<std::string>(lines.begin() + special::kCount, lines.end()));
  } catch (const ContractError& e) {
    throw IngestError("vocabulary '" + path.string() + "': " + e.what());
  }
}

Vocabulary build_vocab(const std::vector<Sentence>& side, std::size_t limit) {
  if (limit < 1) throw ConfigError("vocabulary size limit must be at least 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& s : side)
    for (const auto& w : s)
      if (!is_reserved(w)) ++counts[w];
  if (counts.empty()) throw DomainError("build_vocab: empty corpus");
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < ranked.size() && i < limit; ++i) kept.push_back(ranked[i].first);
  return Vocabulary::from_tokens(kept);
}

Sentence split(std::string_view line) {
  Sentence words;
  std::istringstream is{std::string(line)};
  std::string w;
  while (is >> w) words.push_back(w);
  return words;
}

std::string join(const Sentence& words) {
  std::string s;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) s += ' ';
    s += words[i];
  }
  return s;
}

std::vector<Sentence> read_sentences(const std::filesystem::path& path, bool allow_empty) {
  auto in = open_in(path);
  std::vector<Sentence> out;
  std::string line;
  while (std::getline(in, line)) {
    out.push_back(split(line));
    if (!allow_empty && out.back().empty())
      throw IngestError("empty sentence in '" + path.string() + "'", out.size());
  }
  return out;
}

void write_sentences(const std::filesystem::path& path, const std::vector<Sentence>& sentences) {
  auto out = open_out(path);
  for (const auto& s : sentences) out << join(s) << '\n';
}

ParallelCorpus read_parallel(const std::filesystem::path& source, const std::filesystem::path& target) {
  ParallelCorpus c;
  c.source = read_sentences(source);
  c.target = read_sentences(target);
  if (c.source.size() != c.target.size())
    throw IngestError("'" + source.string() + "' has " + std::to_string(c.source.size()) + " lines but '" +
                          target.string() + "' has " + std::to_string(c.target.size()),
                      std::min(c.source.size(), c.target.size()) + 1);
  return c;
}

IndexedCorpus index_corpus(const ParallelCorpus& corpus, const Vocabulary& source_vocab,
                           const Vocabulary& target_vocab) {
  if (corpus.source.size() != corpus.target.size())
    throw IngestError("source and target line counts differ",
                      std::min(corpus.source.size(), corpus.target.size()) + 1);
  IndexedCorpus out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus.source[i].empty() || corpus.target[i].empty()) throw IngestError("empty sentence", i + 1);
    IndexedPair p;
    p.source = source_vocab.encode(corpus.source[i]);
    p.target.push_back(special::kBos);
    for (int id : target_vocab.encode(corpus.target[i])) p.target.push_back(id);
    p.target.push_back(special::kEos);
    out.push_back(std::move(p));
  }
  return out;
}

HomographSpec HomographSpec::standard(std::uint64_t seed) {
  HomographSpec spec;
  spec.seed = seed;
  spec.homographs = {
      {"bank", {{"river", "fluss", "ufer"}, {"money", "geld", "geldinstitut"}}},
      {"bass", {{"fish", "fisch", "barsch"}, {"music", "musik", "bassgitarre"}}},
      {"bat", {{"cave", "hoehle", "fledermaus"}, {"baseball", "baseballspiel", "schlaeger"}}},
      {"bow", {{"arrow", "pfeil", "bogen"}, {"ship", "schiff", "bug"}}},
      {"crane", {{"bird", "vogel", "kranich"}, {"construction", "bau", "baukran"}}},
      {"match", {{"fire", "feuer", "streichholz"}, {"tennis", "tennis", "wettkampf"}}},
      {"pitch", {{"tone", "ton", "tonhoehe"}, {"football", "fussball", "spielfeld"}}},
      {"spring", {{"season", "jahreszeit", "fruehling"}, {"coil", "spule", "feder"}}},
  };
  for (int i = 0; i < 60; ++i) spec.fillers.emplace_back("w" + std::to_string(i), "v" + std::to_string(i));
  return spec;
}

void HomographSpec::validate() const {
  if (homographs.empty()) throw ConfigError("homograph spec: no homographs");
  if (fillers.empty()) throw ConfigError("homograph spec: no filler words");
  if (min_length < 2 || max_length < min_length)
    throw ConfigError("homograph spec: sentence lengths must satisfy 2 <= min <= max");
  std::set<std::string> sources, targets, homograph_words;
  auto claim_source = [&](const std::string& w, const char* role) {
    if (!sources.insert(w).second) throw ConfigError("homograph spec: source word '" + w + "' reused as " + role);
  };
  auto claim_target = [&](const std::string& w) {
    if (!targets.insert(w).second) throw ConfigError("homograph spec: target word '" + w + "' is not unique");
  };
  for (const auto& h : homographs) {
    claim_source(h.word, "homograph");
    homograph_words.insert(h.word);
    if (h.senses.size() < 2) throw ConfigError("homograph spec: '" + h.word + "' needs at least two senses");
  }
  for (const auto& h : homographs)
    for (const auto& s : h.senses) {
      if (homograph_words.count(s.cue)) throw ConfigError("homograph spec: cue '" + s.cue + "' is a homograph");
      claim_source(s.cue, "cue");
      claim_target(s.target);
      claim_target(s.cue_target);
    }
  for (const auto& [src, tgt] : fillers) {
    claim_source(src, "filler");
    claim_target(tgt);
  }
}

SyntheticCorpus gen_homograph_corpus(const HomographSpec& spec, std::size_t n_pairs) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<std::pair<std::size_t, std::size_t>> combos;
  for (std::size_t h = 0; h < spec.homographs.size(); ++h)
    for (std::size_t s = 0; s < spec.homographs[h].senses.size(); ++s) combos.emplace_back(h, s);

  SyntheticCorpus out;
  std::vector<std::size_t> order;
  std::uniform_int_distribution<std::size_t> length(spec.min_length, spec.max_length);
  std::uniform_int_distribution<std::size_t> filler(0, spec.fillers.size() - 1);
  std::bernoulli_distribution cue_after(0.5);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    if (order.empty()) {
      order.resize(combos.size());
      for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
      std::shuffle(order.begin(), order.end(), rng);
    }
    const auto [hi, si] = combos[order.back()];
    order.pop_back();
    const auto& hom = spec.homographs[hi];
    const auto& sense = hom.senses[si];

    const std::size_t n = length(rng);
    // The cue lands strictly before or strictly after the homograph.
    const bool after = cue_after(rng);
    std::size_t hpos, cpos;
    if (after) {
      hpos = std::uniform_int_distribution<std::size_t>(0, n - 2)(rng);
      cpos = std::uniform_int_distribution<std::size_t>(hpos + 1, n - 1)(rng);
    } else {
      hpos = std::uniform_int_distribution<std::size_t>(1, n - 1)(rng);
      cpos = std::uniform_int_distribution<std::size_t>(0, hpos - 1)(rng);
    }
    Sentence src(n), tgt(n);
    for (std::size_t k = 0; k < n; ++k) {
      if (k == hpos) {
        src[k] = hom.word;
        tgt[k] = sense.target;
      } else if (k == cpos) {
        src[k] = sense.cue;
        tgt[k] = sense.cue_target;
      } else {
        const auto& f = spec.fillers[filler(rng)];
        src[k] = f.first;
        tgt[k] = f.second;
      }
    }
    out.corpus.source.push_back(std::move(src));
    out.corpus.target.push_back(std::move(tgt));
    out.labels.push_back({i, hom.word, sense.target});
  }
  return out;
}

void write_labels(const std::filesystem::path& path, const std::vector<SenseLabel>& labels) {
  auto out = open_out(path);
  for (const auto& l : labels) out << l.line << '\t' << l.homograph << '\t' << l.gold_target << '\n';
}

std::vector<SenseLabel> read_labels(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<SenseLabel> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    SenseLabel l;
    std::string idx;
    if (!std::getline(is, idx, '\t') || !std::getline(is, l.homograph, '\t') || !std::getline(is, l.gold_target))
      throw IngestError("labels '" + path.string() + "': expected 3 tab-separated fields", lineno);
    try {
      l.line = std::stoull(idx);
    } catch (const std::exception&) {
      throw IngestError("labels '" + path.string() + "': bad line index '" + idx + "'", lineno);
    }
    labels.push_back(std::move(l));
  }
  return labels;
}

std::vector<std::string> read_word_list(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    auto w = split(line);
    if (w.empty() || w.front().starts_with('#')) continue;
    words.push_back(w.front());
  }
  return words;
}

}  // namespace ctxnmt
