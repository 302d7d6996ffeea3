#pragma once

// SGD training loop: exact-length batching, norm clipping, sticky learning
// rate halving once the dev set overfits, and a perplexity-delta stopping rule.

#include <chrono>
#include <cmath>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ctxnmt/data.hpp"
#include "ctxnmt/seq2seq.hpp"

namespace ctxnmt {

struct TrainConfig {
  double learning_rate = 1.0;
  double clip_norm = 5.0;
  std::size_t max_batch = 256;
  std::size_t max_length = 50;
  double dropout = 0.3;
  double convergence_delta = 0.01;
  int max_epochs = 20;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Sentence pairs of one exact (source length, target length), in corpus order.
struct Batch {
  std::size_t source_length = 0;
  std::size_t target_length = 0;
  std::vector<std::size_t> members;
};

/// Drops pairs longer than max_length on either side, groups the rest by exact
/// (source, target) length, splits groups into batches of at most max_batch and,
/// when rng is given, shuffles the order of the batches. Throws ConfigError
/// when nothing survives the filter.
std::vector<Batch> make_batches(const IndexedCorpus& corpus, const TrainConfig& cfg, Rng* rng);

/// Learning rate for the next epoch given all dev perplexities so far: halved
/// once any epoch has been worse than its predecessor, unchanged otherwise.
double lr_schedule(const std::vector<double>& dev_perplexities, double lr);

/// True when the last two dev perplexities differ by less than delta.
bool has_converged(const std::vector<double>& dev_perplexities, double delta);

struct StepStats {
  double grad_norm = 0.0;  // before clipping
  double scale = 1.0;      // factor applied to the gradients
};

/// theta -= lr * g after rescaling g to clip_norm when its global L2 norm
/// exceeds it. A non-finite gradient throws NumericError naming the tensor and
/// leaves the parameters untouched.
template <typename Scalar>
StepStats sgd_step(ParameterSet<Scalar>& params, double lr, double clip_norm) {
  double sq = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    if (!p.grad.allFinite()) throw NumericError("non-finite gradient in '" + p.name + "'");
    sq += p.grad.template cast<double>().squaredNorm();
  }
  StepStats stats;
  stats.grad_norm = std::sqrt(sq);
  if (stats.grad_norm > clip_norm) stats.scale = clip_norm / stats.grad_norm;
  const Scalar step = static_cast<Scalar>(lr * stats.scale);
  params.for_each([&](Parameter<Scalar>& p) { p.value -= step * p.grad; });
  return stats;
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean per-token cross-entropy, dropout active
  double dev_perplexity = 0.0;
  double learning_rate = 0.0;  // rate used during this epoch
  double seconds = 0.0;
  bool halved_after = false;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::string stop_reason;

  /// TSV with header `epoch train_loss dev_ppl lr seconds`. The seconds column
  /// is written as "-" unless with_timing, which keeps logs byte-reproducible.
  void write_tsv(std::ostream& out, bool with_timing = false) const;
  std::vector<double> dev_perplexities() const;
};

/// exp(total cross-entropy / predicted target tokens), dropout off.
template <typename Scalar>
double perplexity(const Seq2Seq<Scalar>& model, const IndexedCorpus& corpus, std::size_t max_batch = 256) {
  if (corpus.empty()) throw DomainError("perplexity: empty corpus");
  TrainConfig all;
  all.max_length = std::numeric_limits<std::size_t>::max();
  all.max_batch = max_batch;
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& batch : make_batches(corpus, all, nullptr)) {
    std::vector<std::vector<int>> src, tgt;
    for (auto m : batch.members) {
      src.push_back(corpus[m].source);
      tgt.push_back(corpus[m].target);
    }
    Graph<Scalar> g(false);
    total += static_cast<double>(model.forward_loss(g, to_columns(src), to_columns(tgt)).value()(0, 0));
    tokens += batch.members.size() * (batch.target_length + 1);
  }
  return std::exp(total / static_cast<double>(tokens));
}

/// Called after every epoch with the updated log; used for checkpointing.
template <typename Scalar>
using EpochCallback = std::function<void(const Seq2Seq<Scalar>&, const TrainLog&)>;

/// Trains model in place. Stops when two consecutive dev perplexities differ
/// by less than convergence_delta or after max_epochs. On divergence the last
/// good parameters are restored and NumericError is thrown.
template <typename Scalar>
TrainLog train(Seq2Seq<Scalar>& model, const IndexedCorpus& corpus, const IndexedCorpus& dev, const TrainConfig& cfg,
               const EpochCallback<Scalar>& on_epoch = {}) {
  cfg.validate();
  if (model.config().dropout != cfg.dropout)
    throw ConfigError("model dropout and training dropout disagree");
  Rng rng(cfg.seed);
  TrainLog log;
  double lr = cfg.learning_rate;
  auto& params = model.parameters();
  ParameterSet<Scalar> last_good = params;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    std::size_t token_sum = 0;
    try {
      for (const auto& batch : make_batches(corpus, cfg, &rng)) {
        std::vector<std::vector<int>> src, tgt;
        for (auto m : batch.members) {
          src.push_back(corpus[m].source);
          tgt.push_back(corpus[m].target);
        }
        const std::size_t tokens = batch.members.size() * (batch.target_length + 1);
        params.zero_grad();
        Graph<Scalar> g;
        auto loss = model.forward_loss(g, to_columns(src), to_columns(tgt), cfg.dropout > 0.0 ? &rng : nullptr);
        loss_sum += static_cast<double>(loss.value()(0, 0));
        token_sum += tokens;
        g.backward(scale(loss, Scalar(1) / static_cast<Scalar>(tokens)));
        sgd_step(params, lr, cfg.clip_norm);
      }
    } catch (const NumericError& e) {
      params.assign_values(last_good);
      log.stop_reason = "diverged";
      throw NumericError(std::string("training diverged in epoch ") + std::to_string(epoch) + ": " + e.what());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(token_sum);
    rec.dev_perplexity = perplexity(model, dev, cfg.max_batch);
    rec.learning_rate = lr;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!std::isfinite(rec.dev_perplexity) || !std::isfinite(rec.train_loss)) {
      params.assign_values(last_good);
      throw NumericError("training diverged in epoch " + std::to_string(epoch) + ": dev perplexity is not finite");
    }
    log.epochs.push_back(rec);
    last_good.assign_values(params);

    const auto history = log.dev_perplexities();
    const double next = lr_schedule(history, lr);
    log.epochs.back().halved_after = next < lr;
    lr = next;
    const bool done = has_converged(history, cfg.convergence_delta);
    if (done) log.stop_reason = "converged";
    else if (epoch == cfg.max_epochs) log.stop_reason = "max_epochs";
    if (on_epoch) on_epoch(model, log);
    if (done) break;
  }
  return log;
}

}  // namespace ctxnmt
