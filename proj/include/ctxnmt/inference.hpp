#pragma once

// Greedy and beam-search decoding.
//
// Search is written against a small scorer interface so it can run on a
// trained Seq2Seq or on hand-built distributions:
//
//   struct Scorer {
//     using State = ...;
//     State start();
//     std::pair<State, Eigen::VectorXd> step(const State&, int previous_token);  // log-probabilities
//   };

#include <algorithm>
#include <cmath>
#include <vector>

#include "ctxnmt/data.hpp"
#include "ctxnmt/seq2seq.hpp"

namespace ctxnmt {

struct Hypothesis {
  std::vector<int> tokens;  // emitted tokens, end-of-sentence excluded
  double log_prob = 0.0;
  bool terminal = false;
};

struct SearchOptions {
  std::size_t beam = 5;
  std::size_t max_len = 0;
  int bos = special::kBos;
  int eos = special::kEos;
};

struct BeamResult {
  Hypothesis best;
  /// Completed hypotheses, best first. Empty when no hypothesis terminated.
  std::vector<Hypothesis> nbest;
};

namespace detail {

/// Index of the largest entry; ties go to the lowest index.
inline int argmax_lowest(const Eigen::VectorXd& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = static_cast<int>(i);
  return best;
}

}  // namespace detail

template <typename Scorer>
Hypothesis greedy_search(Scorer& scorer, const SearchOptions& opt) {
  if (opt.max_len < 1) throw ConfigError("max_len must be at least 1");
  Hypothesis hyp;
  auto state = scorer.start();
  int prev = opt.bos;
  for (std::size_t t = 0; t < opt.max_len; ++t) {
    auto [next, lp] = scorer.step(state, prev);
    const int tok = detail::argmax_lowest(lp);
    hyp.log_prob += lp(tok);
    if (tok == opt.eos) {
      hyp.terminal = true;
      break;
    }
    hyp.tokens.push_back(tok);
    state = std::move(next);
    prev = tok;
  }
  return hyp;
}

/// Beam search over summed log-probabilities, no length normalization.
/// Candidates are ranked by score, then by the rank of their parent, then by
/// token id, so width 1 reproduces greedy_search exactly. Hypotheses ending in
/// end-of-sentence leave the beam for a completed pool capped at the width.
template <typename Scorer>
BeamResult beam_search(Scorer& scorer, const SearchOptions& opt) {
  if (opt.beam < 1) throw ConfigError("beam width must be at least 1");
  if (opt.max_len < 1) throw ConfigError("max_len must be at least 1");
  using State = typename Scorer::State;
  struct Live {
    Hypothesis hyp;
    State state;
  };
  struct Candidate {
    double score;
    std::size_t parent;
    int token;
  };

  std::vector<Live> live;
  live.push_back({Hypothesis{}, scorer.start()});
  std::vector<Hypothesis> completed;

  for (std::size_t t = 0; t < opt.max_len && !live.empty() && completed.size() < opt.beam; ++t) {
    std::vector<Candidate> cands;
    std::vector<State> next_states;
    for (std::size_t k = 0; k < live.size(); ++k) {
      const int prev = live[k].hyp.tokens.empty() ? opt.bos : live[k].hyp.tokens.back();
      auto [next, lp] = scorer.step(live[k].state, prev);
      next_states.push_back(std::move(next));
      for (Eigen::Index v = 0; v < lp.size(); ++v)
        cands.push_back({live[k].hyp.log_prob + lp(v), k, static_cast<int>(v)});
    }
    const std::size_t keep = std::min(opt.beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<Live> survivors;
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& c = cands[i];
      Hypothesis h = live[c.parent].hyp;
      h.log_prob = c.score;
      if (c.token == opt.eos) {
        h.terminal = true;
        if (completed.size() < opt.beam) completed.push_back(std::move(h));
      } else {
        h.tokens.push_back(c.token);
        survivors.push_back({std::move(h), next_states[c.parent]});
      }
    }
    live = std::move(survivors);
  }

  BeamResult result;
  std::stable_sort(completed.begin(), completed.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.log_prob > b.log_prob; });
  result.nbest = completed;
  if (!completed.empty())
    result.best = completed.front();
  else if (!live.empty())
    result.best = live.front().hyp;
  return result;
}

/// Adapts a Seq2Seq model to the scorer interface for one source sentence.
template <typename Scalar>
class ModelScorer {
 public:
  using State = DecoderState<Scalar>;

  ModelScorer(const Seq2Seq<Scalar>& model, const std::vector<int>& source) : model_(model), graph_(false) {
    enc_ = model_.encode(graph_, to_columns({source}));
  }

  State start() { return model_.initial_state(graph_, enc_); }

  std::pair<State, Eigen::VectorXd> step(const State& state, int prev) {
    const int y[] = {prev};
    auto out = model_.decode_step(graph_, state, std::span<const int>(y), enc_);
    const auto& z = out.logits.value();
    Eigen::VectorXd lp = z.col(0).template cast<double>();
    const double shift = lp.maxCoeff();
    lp.array() -= shift + std::log((lp.array() - shift).exp().sum());
    return {std::move(out.state), std::move(lp)};
  }

 private:
  const Seq2Seq<Scalar>& model_;
  Graph<Scalar> graph_;
  EncoderStates<Scalar> enc_;
};

/// Default decoding bound: factor * source length + 5.
inline std::size_t default_max_len(std::size_t source_length, double factor = 2.0) {
  return static_cast<std::size_t>(factor * static_cast<double>(source_length)) + 5;
}

template <typename Scalar>
std::vector<int> greedy_decode(const Seq2Seq<Scalar>& model, const std::vector<int>& source, std::size_t max_len) {
  ModelScorer<Scalar> scorer(model, source);
  SearchOptions opt;
  opt.max_len = max_len;
  return greedy_search(scorer, opt).tokens;
}

template <typename Scalar>
BeamResult beam_decode(const Seq2Seq<Scalar>& model, const std::vector<int>& source, std::size_t beam,
                       std::size_t max_len) {
  if (beam < 1) throw ConfigError("beam width must be at least 1");
  ModelScorer<Scalar> scorer(model, source);
  SearchOptions opt;
  opt.beam = beam;
  opt.max_len = max_len;
  return beam_search(scorer, opt);
}

/// Translates tokenized sentences in order. Empty inputs give empty outputs.
template <typename Scalar>
std::vector<Sentence> translate_corpus(const Seq2Seq<Scalar>& model, const Vocabulary& source_vocab,
                                       const Vocabulary& target_vocab, const std::vector<Sentence>& input,
                                       std::size_t beam = 5, double max_len_factor = 2.0) {
  std::vector<Sentence> out;
  out.reserve(input.size());
  for (const auto& s : input) {
    if (s.empty()) {
      out.emplace_back();
      continue;
    }
    const auto ids = source_vocab.encode(s);
    const auto result = beam_decode(model, ids, beam, default_max_len(ids.size(), max_len_factor));
    out.push_back(target_vocab.decode(result.best.tokens));
  }
  return out;
}

}  // namespace ctxnmt
