#include "ctxnmt/training.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <ostream>

namespace ctxnmt {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("lr must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (max_batch < 1) throw ConfigError("max_batch must be positive");
  if (max_length < 1) throw ConfigError("max_length must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (!(convergence_delta > 0.0)) throw ConfigError("converge_delta must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
}

std::vector<Batch> make_batches(const IndexedCorpus& corpus, const TrainConfig& cfg, Rng* rng) {
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& p = corpus[i];
    if (p.source.empty() || p.target.size() < 2) throw ContractError("make_batches: malformed pair " + std::to_string(i));
    if (p.source_length() > cfg.max_length || p.target_length() > cfg.max_length) continue;
    groups[{p.source_length(), p.target_length()}].push_back(i);
  }
  if (groups.empty()) throw ConfigError("make_batches: no sentence pairs left after length filtering");
  std::vector<Batch> batches;
  for (const auto& [len, members] : groups) {
    for (std::size_t off = 0; off < members.size(); off += cfg.max_batch) {
      Batch b;
      b.source_length = len.first;
      b.target_length = len.second;
      const auto end = std::min(members.size(), off + cfg.max_batch);
      b.members.assign(members.begin() + static_cast<std::ptrdiff_t>(off), members.begin() + static_cast<std::ptrdiff_t>(end));
      batches.push_back(std::move(b));
    }
  }
  if (rng) std::shuffle(batches.begin(), batches.end(), *rng);
  return batches;
}

double lr_schedule(const std::vector<double>& dev_perplexities, double lr) {
  for (std::size_t e = 1; e < dev_perplexities.size(); ++e)
    if (dev_perplexities[e] > dev_perplexities[e - 1]) return lr / 2.0;
  return lr;
}

bool has_converged(const std::vector<double>& dev_perplexities, double delta) {
  const auto n = dev_perplexities.size();
  return n >= 2 && std::abs(dev_perplexities[n - 1] - dev_perplexities[n - 2]) < delta;
}

void TrainLog::write_tsv(std::ostream& out, bool with_timing) const {
  out << "epoch\ttrain_loss\tdev_ppl\tlr\tseconds\n";
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::setprecision(17);
  for (const auto& e : epochs) {
    out << e.epoch << '\t' << e.train_loss << '\t' << e.dev_perplexity << '\t' << e.learning_rate << '\t';
    if (with_timing)
      out << std::setprecision(3) << e.seconds << std::setprecision(17);
    else
      out << '-';
    out << '\n';
  }
  out.flags(flags);
  out.precision(prec);
}

std::vector<double> TrainLog::dev_perplexities() const {
  std::vector<double> v;
  for (const auto& e : epochs) v.push_back(e.dev_perplexity);
  return v;
}

}  // namespace ctxnmt
