#include <cmath>
#include <cstring>
#include <sstream>

#include "ctxnmt/training.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace ctxnmt;

namespace {

IndexedPair pair_of(std::size_t src_len, std::size_t tgt_len, int tag = 5) {
  IndexedPair p;
  p.source.assign(src_len, tag);
  p.target.push_back(special::kBos);
  for (std::size_t i = 0; i < tgt_len; ++i) p.target.push_back(tag);
  p.target.push_back(special::kEos);
  return p;
}

ModelConfig tiny(ContextKind ctx = ContextKind::None) {
  ModelConfig c;
  c.embed_dim = 6;
  c.decoder_hidden = 6;
  c.context = ctx;
  c.source_vocab = 9;
  c.target_vocab = 8;
  c.dropout = 0.0;
  return c;
}

IndexedCorpus toy_corpus() {
  IndexedCorpus c;
  const std::vector<std::vector<int>> src{{5, 6}, {6, 7}, {7, 8, 5}, {8, 5}, {5, 5, 6}, {6, 8}};
  for (const auto& s : src) {
    IndexedPair p;
    p.source = s;
    p.target = {special::kBos};
    for (int v : s) p.target.push_back(v - 1);
    p.target.push_back(special::kEos);
    c.push_back(p);
  }
  return c;
}

}  // namespace

TEST_CASE("defaults follow the training recipe") {
  TrainConfig c;
  CHECK(c.learning_rate == 1.0);
  CHECK(c.clip_norm == 5.0);
  CHECK(c.max_batch == 256);
  CHECK(c.max_length == 50);
  CHECK(c.dropout == 0.3);
  CHECK(c.convergence_delta == 0.01);
  CHECK_NOTHROW(c.validate());
  c.clip_norm = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("make_batches groups by exact lengths") {
  TrainConfig cfg;
  SUBCASE("two groups") {
    IndexedCorpus c;
    for (int i = 0; i < 5; ++i) c.push_back(pair_of(3, 4));
    for (int i = 0; i < 2; ++i) c.push_back(pair_of(3, 5));
    auto b = make_batches(c, cfg, nullptr);
    REQUIRE(b.size() == 2);
    CHECK(b[0].members == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK(b[1].members == std::vector<std::size_t>{5, 6});
    CHECK(b[1].target_length == 5);
  }
  SUBCASE("length filter") {
    IndexedCorpus c{pair_of(51, 3), pair_of(50, 50), pair_of(3, 51)};
    auto b = make_batches(c, cfg, nullptr);
    REQUIRE(b.size() == 1);
    CHECK(b[0].members == std::vector<std::size_t>{1});
    CHECK_THROWS_AS(make_batches(IndexedCorpus{pair_of(51, 3)}, cfg, nullptr), ConfigError);
  }
  SUBCASE("splitting") {
    IndexedCorpus c(300, pair_of(4, 4));
    auto b = make_batches(c, cfg, nullptr);
    REQUIRE(b.size() == 2);
    CHECK(b[0].members.size() == 256);
    CHECK(b[1].members.size() == 44);
    CHECK(b[1].members.front() == 256);
  }
  SUBCASE("seeded shuffle of batch order") {
    IndexedCorpus c;
    for (std::size_t len = 1; len <= 20; ++len) c.push_back(pair_of(len, len));
    Rng r1(4), r2(4);
    auto a = make_batches(c, cfg, &r1);
    auto b = make_batches(c, cfg, &r2);
    REQUIRE(a.size() == 20);
    bool moved = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].members == b[i].members);
      moved = moved || a[i].source_length != i + 1;
    }
    CHECK(moved);
  }
}

TEST_CASE("sgd_step clipping") {
  ParameterSet<double> ps;
  auto& p = ps.add("p", 1, 1);
  p.value(0, 0) = 1.0;
  p.grad(0, 0) = 0.2;
  auto s = sgd_step(ps, 1.0, 5.0);
  CHECK(p.value(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(s.scale == 1.0);

  ParameterSet<double> q;
  auto& a = q.add("a", 2, 1);
  auto& b = q.add("b", 1, 1);
  a.grad << 6.0, 0.0;
  b.grad << 8.0;  // global norm 10
  s = sgd_step(q, 1.0, 5.0);
  CHECK(s.grad_norm == 10.0);
  CHECK(s.scale == 0.5);
  CHECK(a.value(0, 0) == -3.0);
  CHECK(b.value(0, 0) == -4.0);

  a.value.setZero();
  b.value.setZero();
  a.grad << 0.0, 3.0;  // norm 3
  b.grad << 0.0;
  s = sgd_step(q, 1.0, 5.0);
  CHECK(s.scale == 1.0);
  CHECK(a.value(1, 0) == -3.0);

  b.grad(0, 0) = std::nan("");
  a.value.setConstant(7.0);
  try {
    sgd_step(q, 1.0, 5.0);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  CHECK(a.value(0, 0) == 7.0);
}

TEST_CASE("lr_schedule halves once overfitting starts") {
  CHECK(lr_schedule({10}, 1.0) == 1.0);
  CHECK(lr_schedule({10, 9, 8}, 1.0) == 1.0);
  double lr = lr_schedule({10, 9, 9.5}, 1.0);
  CHECK(lr == 0.5);
  lr = lr_schedule({10, 9, 9.5, 8}, lr);
  CHECK(lr == 0.25);
  lr = lr_schedule({10, 9, 9.5, 8, 7}, lr);
  CHECK(lr == 0.125);
}

TEST_CASE("convergence rule") {
  CHECK(has_converged({5.00, 4.995}, 0.01));
  CHECK_FALSE(has_converged({5.00, 4.98}, 0.01));
  CHECK_FALSE(has_converged({5.00}, 0.01));
  CHECK(has_converged({5.0, 4.0, 4.0}, 0.01));
}

TEST_CASE("perplexity") {
  const auto corpus = toy_corpus();
  Seq2Seq<double> zero(tiny());
  CHECK(perplexity(zero, corpus) == doctest::Approx(8.0).epsilon(1e-13));
  CHECK_THROWS_AS(perplexity(zero, IndexedCorpus{}), DomainError);

  Seq2Seq<double> m(tiny());
  Rng rng(3);
  m.initialize(rng);
  auto reversed = corpus;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(perplexity(m, corpus) == doctest::Approx(perplexity(m, reversed)).epsilon(1e-12));
}

TEST_CASE("one step trains the context network jointly") {
  auto cfg = tiny(ContextKind::BiLSTM);
  Seq2Seq<double> m(cfg);
  Rng rng(2);
  m.initialize(rng);
  const auto before = m.parameters();
  TrainConfig tc;
  tc.dropout = 0.0;
  tc.max_epochs = 1;
  train(m, toy_corpus(), toy_corpus(), tc);
  bool ctx_changed = false;
  for (const std::string name : {"ctx.fwd.Wx", "ctx.bwd.Wh", "ctx.W3"})
    ctx_changed = ctx_changed || m.parameters().at(name).value != before.at(name).value;
  CHECK(ctx_changed);
}

TEST_CASE("train is reproducible and keeps the schedule invariants") {
  auto run = [] {
    ModelConfig cfg = tiny(ContextKind::NBOW);
    cfg.dropout = 0.3;
    Seq2Seq<double> m(cfg);
    Rng rng(5);
    m.initialize(rng);
    TrainConfig tc;
    tc.max_epochs = 6;
    tc.seed = 9;
    auto log = train(m, toy_corpus(), toy_corpus(), tc);
    std::ostringstream out;
    log.write_tsv(out);
    return std::pair{out.str(), m};
  };
  auto [log_a, model_a] = run();
  auto [log_b, model_b] = run();
  CHECK(log_a == log_b);
  for (std::size_t i = 0; i < model_a.parameters().size(); ++i) {
    const auto& x = model_a.parameters()[i].value;
    const auto& y = model_b.parameters()[i].value;
    CHECK(std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0);
  }
  CHECK(log_a.starts_with("epoch\ttrain_loss\tdev_ppl\tlr\tseconds\n"));
}

TEST_CASE("train log records halving and stop reason") {
  Seq2Seq<double> m(tiny());
  Rng rng(1);
  m.initialize(rng);
  TrainConfig tc;
  tc.dropout = 0.0;
  tc.max_epochs = 15;
  tc.learning_rate = 2.0;
  auto log = train(m, toy_corpus(), toy_corpus(), tc);
  REQUIRE(!log.epochs.empty());
  CHECK((log.stop_reason == "converged" || log.stop_reason == "max_epochs"));
  bool halving = false;
  for (std::size_t e = 1; e < log.epochs.size(); ++e) {
    CHECK(log.epochs[e].learning_rate <= log.epochs[e - 1].learning_rate);
    if (halving) CHECK(log.epochs[e].learning_rate == log.epochs[e - 1].learning_rate / 2);
    halving = halving || log.epochs[e - 1].halved_after;
  }
  CHECK(log.epochs.back().dev_perplexity < 8.0);
}

TEST_CASE("train rejects mismatched dropout") {
  Seq2Seq<double> m(tiny());
  TrainConfig tc;  // dropout 0.3, model 0.0
  CHECK_THROWS_AS(train(m, toy_corpus(), toy_corpus(), tc), ConfigError);
}
