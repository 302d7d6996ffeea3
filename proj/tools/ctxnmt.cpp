// ctxnmt: command-line front end for the whole pipeline.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "ctxnmt/checkpoint.hpp"
#include "ctxnmt/config.hpp"
#include "ctxnmt/eval.hpp"
#include "ctxnmt/grad_check.hpp"
#include "ctxnmt/inference.hpp"
#include "ctxnmt/training.hpp"

namespace fs = std::filesystem;
using namespace ctxnmt;

namespace {

/// Writes resolved.cfg and run.log next to a command's outputs.
class RunRecord {
 public:
  RunRecord(const fs::path& dir, const std::string& command) : dir_(dir.empty() ? fs::path(".") : dir) {
    fs::create_directories(dir_);
    log_.open(dir_ / "run.log", std::ios::trunc);
    if (!log_) throw IngestError("cannot write '" + (dir_ / "run.log").string() + "'");
    log_ << "command " << command << '\n';
  }

  void resolved(const std::string& text) {
    std::ofstream out(dir_ / "resolved.cfg", std::ios::trunc);
    if (!out) throw IngestError("cannot write '" + (dir_ / "resolved.cfg").string() + "'");
    out << text;
  }

  std::ostream& log() { return log_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::ofstream log_;
};

std::string options_text(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + " = " + v + '\n';
  return s;
}

fs::path parent_of(const fs::path& p) { return p.has_parent_path() ? p.parent_path() : fs::path("."); }

std::string keys_help() {
  std::ostringstream out;
  out << "\nConfig keys (key = default):\n";
  for (const auto& k : config_keys())
    out << "  " << std::left << std::setw(16) << k.name << std::setw(9) << (k.default_value.empty() ? "-" : k.default_value)
        << k.help << '\n';
  return out.str();
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "run";
};

RunConfig resolve(const std::string& path, const std::vector<std::string>& overrides,
                  const std::optional<std::uint64_t>& seed) {
  RunConfig cfg = path.empty() ? RunConfig{} : RunConfig::from_file(path);
  // Data paths in a config file are relative to that file.
  for (const char* key : {"train_src", "train_tgt", "dev_src", "dev_tgt"})
    if (cfg.has_value(key) && fs::path(cfg.get(key)).is_relative())
      cfg.set(key, (fs::path(path).parent_path() / cfg.get(key)).lexically_normal().string());
  for (const auto& o : overrides) cfg.set(std::string_view(o));
  if (seed) cfg.set("seed", std::to_string(*seed));
  return cfg;
}

template <typename Scalar>
void train_with(const RunConfig& cfg, RunRecord& rec) {
  if (!cfg.has_value("train_src") || !cfg.has_value("train_tgt"))
    throw ConfigError("train_src and train_tgt must be set");
  const auto corpus = read_parallel(cfg.get("train_src"), cfg.get("train_tgt"));
  const auto dev_text = cfg.has_value("dev_src") ? read_parallel(cfg.get("dev_src"), cfg.get("dev_tgt")) : corpus;
  const auto src_limit = cfg.get_int("src_vocab_size"), tgt_limit = cfg.get_int("tgt_vocab_size");
  if (src_limit < 1 || tgt_limit < 1) throw ConfigError("vocabulary sizes must be positive");
  const auto src_vocab = build_vocab(corpus.source, static_cast<std::size_t>(src_limit));
  const auto tgt_vocab = build_vocab(corpus.target, static_cast<std::size_t>(tgt_limit));
  const auto train_set = index_corpus(corpus, src_vocab, tgt_vocab);
  const auto dev_set = index_corpus(dev_text, src_vocab, tgt_vocab);

  const auto mcfg = model_config(cfg, static_cast<Index>(src_vocab.size()), static_cast<Index>(tgt_vocab.size()));
  const auto tcfg = train_config(cfg);
  Seq2Seq<Scalar> model(mcfg);
  Rng init(tcfg.seed);
  model.initialize(init, cfg.get_double("init_range"));
  rec.log() << "pairs " << train_set.size() << " dev " << dev_set.size() << " src_vocab " << src_vocab.size()
            << " tgt_vocab " << tgt_vocab.size() << " parameters " << model.parameters().scalar_count() << '\n';
  src_vocab.save(rec.dir() / "src.vocab");
  tgt_vocab.save(rec.dir() / "tgt.vocab");

  auto on_epoch = [&](const Seq2Seq<Scalar>& m, const TrainLog& log) {
    const auto& e = log.epochs.back();
    save_checkpoint(rec.dir() / ("epoch" + std::to_string(e.epoch) + ".ckpt"), m, src_vocab, tgt_vocab);
    std::ofstream tsv(rec.dir() / "train_log.tsv", std::ios::trunc);
    log.write_tsv(tsv);
    rec.log() << "epoch " << e.epoch << " train_loss " << std::setprecision(17) << e.train_loss << " dev_ppl "
              << e.dev_perplexity << " lr " << e.learning_rate << (e.halved_after ? " halving" : "") << '\n';
  };
  const auto log = train(model, train_set, dev_set, tcfg, EpochCallback<Scalar>(on_epoch));
  save_checkpoint(rec.dir() / "model.ckpt", model, src_vocab, tgt_vocab);
  rec.log() << "stop " << log.stop_reason << " after " << log.epochs.size() << " epochs\n";
  std::cout << "trained " << log.epochs.size() << " epochs (" << log.stop_reason << "), dev perplexity "
            << std::setprecision(6) << log.epochs.back().dev_perplexity << '\n';
}

int cmd_train(const TrainArgs& a) {
  const auto cfg = resolve(a.config, a.overrides, a.seed);
  RunRecord rec(a.out_dir, "train");
  std::ostringstream text;
  cfg.write(text);
  rec.resolved(text.str());
  const auto& precision = cfg.get("precision");
  if (precision == "double")
    train_with<double>(cfg, rec);
  else if (precision == "float")
    train_with<float>(cfg, rec);
  else
    throw ConfigError("precision must be double|float, got '" + precision + "'");
  return 0;
}

// ---------------------------------------------------------------- translate

struct TranslateArgs {
  std::string model, input, output;
  std::size_t beam = 5;
  double max_len_factor = 2.0;
};

template <typename Scalar>
std::vector<Sentence> translate_with(const TranslateArgs& a, const std::vector<Sentence>& input) {
  const auto ck = load_checkpoint<Scalar>(a.model);
  return translate_corpus(ck.model, ck.source_vocab, ck.target_vocab, input, a.beam, a.max_len_factor);
}

int cmd_translate(const TranslateArgs& a) {
  if (a.beam < 1) throw ConfigError("beam width must be at least 1");
  if (!(a.max_len_factor > 0.0)) throw ConfigError("max-len-factor must be positive");
  const auto input = read_sentences(a.input, true);
  RunRecord rec(parent_of(a.output), "translate");
  rec.resolved(options_text({{"model", a.model},
                             {"input", a.input},
                             {"output", a.output},
                             {"beam", std::to_string(a.beam)},
                             {"max_len_factor", std::to_string(a.max_len_factor)}}));
  const auto out = checkpoint_scalar_size(a.model) == sizeof(float) ? translate_with<float>(a, input)
                                                                    : translate_with<double>(a, input);
  write_sentences(a.output, out);
  rec.log() << "translated " << out.size() << " lines\n";
  return 0;
}

// ---------------------------------------------------------------- small commands

int cmd_build_vocab(const std::string& input, std::size_t size, const std::string& output) {
  const auto v = build_vocab(read_sentences(input), size);
  v.save(output);
  std::cout << v.size() << " entries\n";
  return 0;
}

int cmd_gen_synthetic(const std::string& out_dir, std::size_t train_pairs, std::size_t test_pairs,
                      std::uint64_t seed) {
  const auto spec = HomographSpec::standard(seed);
  auto all = gen_homograph_corpus(spec, train_pairs + test_pairs);
  RunRecord rec(out_dir, "gen-synthetic");
  rec.resolved(options_text({{"train_pairs", std::to_string(train_pairs)},
                             {"test_pairs", std::to_string(test_pairs)},
                             {"seed", std::to_string(seed)}}));
  const fs::path dir(out_dir);
  auto emit = [&](const std::string& name, std::size_t from, std::size_t to) {
    std::vector<Sentence> s(all.corpus.source.begin() + static_cast<std::ptrdiff_t>(from),
                            all.corpus.source.begin() + static_cast<std::ptrdiff_t>(to));
    std::vector<Sentence> t(all.corpus.target.begin() + static_cast<std::ptrdiff_t>(from),
                            all.corpus.target.begin() + static_cast<std::ptrdiff_t>(to));
    std::vector<SenseLabel> labels(all.labels.begin() + static_cast<std::ptrdiff_t>(from),
                                   all.labels.begin() + static_cast<std::ptrdiff_t>(to));
    for (auto& l : labels) l.line -= from;
    write_sentences(dir / (name + ".src"), s);
    write_sentences(dir / (name + ".tgt"), t);
    write_labels(dir / (name + ".labels"), labels);
  };
  emit("train", 0, train_pairs);
  emit("test", train_pairs, train_pairs + test_pairs);
  std::ofstream hom(dir / "homographs.txt"), senses(dir / "senses.tsv");
  for (const auto& h : spec.homographs) {
    hom << h.word << '\n';
    senses << h.word << '\t' << h.senses.size() << '\n';
    for (const auto& s : h.senses) senses << s.cue << "\t1\n";
  }
  for (const auto& [w, t] : spec.fillers) senses << w << "\t1\n";
  rec.log() << "wrote " << train_pairs << " train and " << test_pairs << " test pairs\n";
  return 0;
}

int cmd_score_bleu(const std::string& ref, const std::string& hyp) {
  const double b = bleu(read_sentences(ref, true), read_sentences(hyp, true));
  std::cout << std::fixed << std::setprecision(4) << b << '\n';
  return 0;
}

struct AlignArgs {
  std::string src, tgt, output;
  std::vector<std::string> pool_src, pool_tgt;
  int iterations = 10;
};

int cmd_align(const AlignArgs& a) {
  if (a.pool_src.size() != a.pool_tgt.size()) throw ConfigError("--pool-src and --pool-tgt must pair up");
  // Hypotheses may be empty; such pairs get no links and stay out of the tables.
  const ParallelCorpus target{read_sentences(a.src, true), read_sentences(a.tgt, true)};
  if (target.source.size() != target.target.size())
    throw IngestError("'" + a.src + "' and '" + a.tgt + "' have different line counts");
  ParallelCorpus pool;
  auto add = [&](const ParallelCorpus& c) {
    for (std::size_t k = 0; k < c.size(); ++k)
      if (!c.source[k].empty() && !c.target[k].empty()) {
        pool.source.push_back(c.source[k]);
        pool.target.push_back(c.target[k]);
      }
  };
  add(target);
  for (std::size_t k = 0; k < a.pool_src.size(); ++k) add(read_parallel(a.pool_src[k], a.pool_tgt[k]));

  RunRecord rec(parent_of(a.output), "align");
  rec.resolved(options_text({{"src", a.src}, {"tgt", a.tgt}, {"iterations", std::to_string(a.iterations)},
                             {"pool_pairs", std::to_string(pool.size())}}));
  if (pool.size() == 0) {  // nothing to learn from; every pair has an empty side
    write_pharaoh(a.output, AlignmentSet(target.size()));
    rec.log() << "no non-empty pairs\n";
    return 0;
  }
  const auto fwd = train_aligner(pool, a.iterations, AlignDirection::SourceToTarget);
  const auto bwd = train_aligner(pool, a.iterations, AlignDirection::TargetToSource);
  AlignmentSet out;
  for (std::size_t k = 0; k < target.size(); ++k) out.push_back(align(target.source[k], target.target[k], fwd, bwd));
  write_pharaoh(a.output, out);
  rec.log() << std::setprecision(17) << "log_likelihood forward " << fwd.log_likelihood().back() << " backward "
            << bwd.log_likelihood().back() << '\n';
  return 0;
}

std::set<std::string> optional_words(const std::string& path) {
  if (path.empty()) return {};
  const auto w = read_word_list(path);
  return {w.begin(), w.end()};
}

struct EvalArgs {
  std::string src, ref, hyp, ref_align, hyp_align, homographs, stop_words, senses, output, json;
};

int cmd_eval_homograph(const EvalArgs& a) {
  const auto src = read_sentences(a.src, true), ref = read_sentences(a.ref, true), hyp = read_sentences(a.hyp, true);
  const auto ra = read_pharaoh(a.ref_align), ha = read_pharaoh(a.hyp_align);
  if (src.size() != ref.size() || src.size() != hyp.size() || src.size() != ra.size() || src.size() != ha.size())
    throw IngestError("eval-homograph: inputs have different line counts");
  std::vector<TranslationPair> pairs;
  for (std::size_t k = 0; k < src.size(); ++k) pairs.push_back({src[k], ref[k], hyp[k], ra[k], ha[k]});
  const auto stop = optional_words(a.stop_words);
  const auto words = a.homographs.empty() ? source_words(pairs) : read_word_list(a.homographs);
  HomographReport report;
  try {
    report = word_translation_f1(pairs, words, stop);
  } catch (const ContractError& e) {
    throw IngestError(std::string("eval-homograph: ") + e.what());
  }
  std::optional<BucketReport> buckets;
  if (!a.senses.empty()) {
    SenseDictionary dict{SenseDictionary::read_senses(a.senses), stop};
    std::map<std::string, double> f1;
    for (const auto& [w, c] : report.per_word) f1[w] = c.f1();
    buckets = sense_bucket_report(f1, dict);
  }
  RunRecord rec(parent_of(a.output), "eval-homograph");
  rec.resolved(options_text({{"src", a.src}, {"ref", a.ref}, {"hyp", a.hyp}, {"ref_align", a.ref_align},
                             {"hyp_align", a.hyp_align}, {"homographs", a.homographs}, {"stop_words", a.stop_words},
                             {"senses", a.senses}}));
  std::ofstream out(a.output);
  if (!out) throw IngestError("cannot write '" + a.output + "'");
  write_report_tsv(out, report, buckets ? &*buckets : nullptr);
  if (!a.json.empty()) {
    std::ofstream js(a.json);
    write_report_json(js, report, buckets ? &*buckets : nullptr);
  }
  rec.log() << "micro_f1 " << std::setprecision(17) << report.micro.f1() << '\n';
  std::cout << "micro F1 " << std::fixed << std::setprecision(4) << report.micro.f1() << '\n';
  return 0;
}

int cmd_bucket_report(const std::string& report, const std::string& senses, const std::string& stop_words,
                      const std::string& output) {
  const auto rows = read_report_tsv(report);
  SenseDictionary dict{SenseDictionary::read_senses(senses), optional_words(stop_words)};
  std::map<std::string, double> f1;
  for (const auto& [w, c] : rows) f1[w] = c.f1();
  const auto b = sense_bucket_report(f1, dict);
  std::ofstream file;
  if (!output.empty()) {
    file.open(output);
    if (!file) throw IngestError("cannot write '" + output + "'");
  }
  std::ostream& out = output.empty() ? std::cout : file;
  out << std::fixed << std::setprecision(6) << "senses\twords\tmean_f1\n";
  for (const auto& s : b.buckets) out << s.senses << '\t' << s.words << '\t' << s.mean_f1 << '\n';
  for (std::size_t i = 0; i < b.series.size(); ++i) out << "#bucket\t" << i << '\t' << b.series[i] << '\n';
  return 0;
}

int cmd_grad_check(const std::string& config, const std::vector<std::string>& overrides,
                   const std::optional<std::uint64_t>& seed) {
  auto cfg = resolve(config, overrides, seed);
  cfg.set("dropout", "0");
  const auto mcfg = model_config(cfg, 10, 9);
  Seq2Seq<double> model(mcfg);
  Rng rng(cfg.get_seed());
  std::uniform_real_distribution<double> dist(-0.3, 0.3);
  model.parameters().for_each([&](Parameter<double>& p) {
    for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = dist(rng);
  });
  const auto x = to_columns({{5, 6, 7}});
  const auto y = to_columns({{special::kBos, 4, 5, 6, 7, special::kEos}});
  const auto r = grad_check<double>([&](Graph<double>& g) { return model.forward_loss(g, x, y); }, model.parameters());
  std::cout << "max relative error " << std::scientific << std::setprecision(3) << r.max_relative_error << " at "
            << r.worst_parameter << "[" << r.worst_index << "] over " << r.coordinates << " coordinates\n";
  return r.max_relative_error < 1e-4 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-aware NMT toolkit"};
  app.footer(keys_help());
  app.require_subcommand(1);

  TrainArgs ta;
  std::uint64_t seed_value = 0;
  auto* train_cmd = app.add_subcommand("train", "train a model; writes epoch<N>.ckpt, model.ckpt, train_log.tsv");
  train_cmd->add_option("--config", ta.config, "key = value config file")->check(CLI::ExistingFile);
  train_cmd->add_option("--set", ta.overrides, "override, key=value (repeatable)");
  auto* train_seed = train_cmd->add_option("--seed", seed_value, "random seed (overrides the config)");
  train_cmd->add_option("--out-dir", ta.out_dir, "output directory")->capture_default_str();
  train_cmd->footer(keys_help());

  TranslateArgs tr;
  auto* translate_cmd = app.add_subcommand("translate", "beam-search a tokenized file");
  translate_cmd->add_option("--model", tr.model, "checkpoint")->required()->check(CLI::ExistingFile);
  translate_cmd->add_option("--input", tr.input, "source text")->required()->check(CLI::ExistingFile);
  translate_cmd->add_option("--output", tr.output, "hypothesis file")->required();
  translate_cmd->add_option("--beam", tr.beam, "beam width")->capture_default_str();
  translate_cmd->add_option("--max-len-factor", tr.max_len_factor, "length bound factor")->capture_default_str();

  std::string bv_input, bv_output;
  std::size_t bv_size = 50000;
  auto* vocab_cmd = app.add_subcommand("build-vocab", "frequency-ranked vocabulary of a text file");
  vocab_cmd->add_option("--input", bv_input)->required()->check(CLI::ExistingFile);
  vocab_cmd->add_option("--size", bv_size, "entries kept besides the reserved symbols")->capture_default_str();
  vocab_cmd->add_option("--output", bv_output)->required();

  std::string gs_dir;
  std::size_t gs_train = 10000, gs_test = 1000;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "synthetic homograph corpus");
  gen_cmd->add_option("--out-dir", gs_dir)->required();
  gen_cmd->add_option("--train-pairs", gs_train)->capture_default_str();
  gen_cmd->add_option("--test-pairs", gs_test)->capture_default_str();
  auto* gen_seed = gen_cmd->add_option("--seed", seed_value, "random seed");

  std::string bl_ref, bl_hyp;
  auto* bleu_cmd = app.add_subcommand("score-bleu", "corpus BLEU");
  bleu_cmd->add_option("--ref", bl_ref)->required()->check(CLI::ExistingFile);
  bleu_cmd->add_option("--hyp", bl_hyp)->required()->check(CLI::ExistingFile);

  AlignArgs al;
  auto* align_cmd = app.add_subcommand("align", "IBM Model 1 alignments in Pharaoh format");
  align_cmd->add_option("--src", al.src)->required()->check(CLI::ExistingFile);
  align_cmd->add_option("--tgt", al.tgt)->required()->check(CLI::ExistingFile);
  align_cmd->add_option("--output", al.output)->required();
  align_cmd->add_option("--pool-src", al.pool_src, "extra source text for training the tables");
  align_cmd->add_option("--pool-tgt", al.pool_tgt, "extra target text for training the tables");
  align_cmd->add_option("--iterations", al.iterations)->capture_default_str();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval-homograph", "alignment-based word translation F1");
  eval_cmd->add_option("--src", ev.src)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--ref", ev.ref)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--hyp", ev.hyp)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--ref-align", ev.ref_align)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--hyp-align", ev.hyp_align)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--homographs", ev.homographs, "word list (default: every source word)")->check(CLI::ExistingFile);
  eval_cmd->add_option("--stop-words", ev.stop_words)->check(CLI::ExistingFile);
  eval_cmd->add_option("--senses", ev.senses, "word<TAB>count; adds the bucket series")->check(CLI::ExistingFile);
  eval_cmd->add_option("--output", ev.output, "TSV report")->required();
  eval_cmd->add_option("--json", ev.json, "JSON mirror of the report");

  std::string br_report, br_senses, br_stop, br_output;
  auto* bucket_cmd = app.add_subcommand("bucket-report", "per-sense-count buckets of a TSV report");
  bucket_cmd->add_option("--report", br_report)->required()->check(CLI::ExistingFile);
  bucket_cmd->add_option("--senses", br_senses)->required()->check(CLI::ExistingFile);
  bucket_cmd->add_option("--stop-words", br_stop)->check(CLI::ExistingFile);
  bucket_cmd->add_option("--output", br_output);

  std::string gc_config;
  std::vector<std::string> gc_overrides;
  auto* gc_cmd = app.add_subcommand("grad-check", "finite-difference check of a small model of the configured shape");
  gc_cmd->add_option("--config", gc_config)->check(CLI::ExistingFile);
  gc_cmd->add_option("--set", gc_overrides, "override, key=value (repeatable)");
  auto* gc_seed = gc_cmd->add_option("--seed", seed_value, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) {
      if (*train_seed) ta.seed = seed_value;
      return cmd_train(ta);
    }
    if (*translate_cmd) return cmd_translate(tr);
    if (*vocab_cmd) return cmd_build_vocab(bv_input, bv_size, bv_output);
    if (*gen_cmd) return cmd_gen_synthetic(gs_dir, gs_train, gs_test, *gen_seed ? seed_value : 1);
    if (*bleu_cmd) return cmd_score_bleu(bl_ref, bl_hyp);
    if (*align_cmd) return cmd_align(al);
    if (*eval_cmd) return cmd_eval_homograph(ev);
    if (*bucket_cmd) return cmd_bucket_report(br_report, br_senses, br_stop, br_output);
    if (*gc_cmd) return cmd_grad_check(gc_config, gc_overrides, *gc_seed ? std::optional(seed_value) : std::nullopt);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const IngestError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
