#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ctxnmt/errors.hpp"
#include "ctxnmt/eval.hpp"
#include "ctxnmt/tensor.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace ctxnmt;
namespace fs = std::filesystem;

namespace {

ParallelCorpus bijective_corpus(std::size_t pairs, std::uint64_t seed) {
  Rng rng(seed);
  ParallelCorpus c;
  std::uniform_int_distribution<int> len(3, 8);
  std::vector<int> words(20);
  for (int i = 0; i < 20; ++i) words[static_cast<std::size_t>(i)] = i;
  for (std::size_t k = 0; k < pairs; ++k) {
    std::shuffle(words.begin(), words.end(), rng);
    Sentence s, t;
    for (int i = 0; i < len(rng); ++i) {
      s.push_back("s" + std::to_string(words[static_cast<std::size_t>(i)]));
      t.push_back("t" + std::to_string(words[static_cast<std::size_t>(i)]));
    }
    c.source.push_back(s);
    c.target.push_back(t);
  }
  return c;
}

Alignment random_links(Rng& rng, int n, int m, double p) {
  std::bernoulli_distribution keep(p);
  Alignment a;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      if (keep(rng)) a.emplace(i, j);
  return a;
}

}  // namespace

TEST_CASE("bleu examples") {
  const std::vector<Sentence> ref{{"a", "b", "c", "d"}, {"e", "f"}};
  CHECK(bleu(ref, ref) == 1.0);
  const double b = bleu({{"a", "b", "c", "d"}}, {{"a", "b", "c", "d", "e"}});
  CHECK(b == doctest::Approx(std::pow(4.0 / 5 * 3.0 / 4 * 2.0 / 3 * 1.0 / 2, 0.25)).epsilon(1e-12));
  CHECK(std::round(b * 1e4) / 1e4 == 0.6687);
  const double none = bleu({{"a", "b", "c"}}, {{"x", "y", "z"}});
  CHECK(none >= 0.0);
  CHECK(none < 0.05);
  CHECK(bleu({{"a"}}, {{}}) == 0.0);
  CHECK_THROWS_AS(bleu(ref, {{"a"}}), ContractError);
  const std::vector<Sentence> hyp{{"a", "b", "x", "d"}, {"e", "f", "g"}};
  CHECK(bleu(ref, hyp) == doctest::Approx(bleu({ref[1], ref[0]}, {hyp[1], hyp[0]})).epsilon(1e-15));
  // Shorter hypothesis pays the brevity penalty exp(1 - 4/3).
  CHECK(bleu({{"a", "b", "c", "d"}}, {{"a", "b", "c"}}) ==
        doctest::Approx(std::exp(1.0 - 4.0 / 3.0) * std::pow(1.0 * 1.0 * 1.0 * 1.0, 0.25)).epsilon(1e-12));
}

TEST_CASE("model 1 hand examples") {
  ParallelCorpus one{{{"a"}}, {{"x"}}};
  auto t = train_aligner(one, 1, AlignDirection::SourceToTarget);
  CHECK(t.prob("x", "a") == 1.0);

  ParallelCorpus two{{{"a"}, {"a", "b"}}, {{"x"}, {"x", "y"}}};
  t = train_aligner(two, 2, AlignDirection::SourceToTarget);
  CHECK(t.prob("x", "a") == doctest::Approx(24.0 / 29.0).epsilon(1e-14));
  CHECK(t.prob("y", "a") == doctest::Approx(5.0 / 29.0).epsilon(1e-14));
  CHECK(t.prob("x", "b") == doctest::Approx(0.375).epsilon(1e-14));
  CHECK(t.prob("y", "b") == doctest::Approx(0.625).epsilon(1e-14));
  CHECK(t.prob("q", "a") == 0.0);
  auto r = train_aligner(two, 1, AlignDirection::TargetToSource);
  CHECK(r.prob("a", "x") > r.prob("b", "x"));

  CHECK_THROWS_AS(train_aligner(ParallelCorpus{}, 1, AlignDirection::SourceToTarget), DomainError);
  CHECK_THROWS_AS(train_aligner(two, 0, AlignDirection::SourceToTarget), ConfigError);
}

TEST_CASE("model 1 likelihood never decreases") {
  const auto c = bijective_corpus(200, 4);
  for (auto dir : {AlignDirection::SourceToTarget, AlignDirection::TargetToSource}) {
    auto t = train_aligner(c, 10, dir);
    const auto& ll = t.log_likelihood();
    REQUIRE(ll.size() == 11);
    for (std::size_t i = 1; i < ll.size(); ++i) CHECK(ll[i] >= ll[i - 1]);
  }
}

TEST_CASE("bijective corpus aligns to the identity") {
  const auto c = bijective_corpus(500, 7);
  auto fwd = train_aligner(c, 10, AlignDirection::SourceToTarget);
  auto bwd = train_aligner(c, 10, AlignDirection::TargetToSource);
  std::size_t good = 0, total = 0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    const auto a = align(c.source[k], c.target[k], fwd, bwd);
    for (int i = 0; i < static_cast<int>(c.source[k].size()); ++i) {
      ++total;
      Alignment row;
      for (const auto& l : a)
        if (l.first == i) row.insert(l);
      good += row == Alignment{{i, i}};
    }
  }
  CHECK(static_cast<double>(good) / static_cast<double>(total) >= 0.95);
}

TEST_CASE("align edge cases") {
  ParallelCorpus one{{{"a"}}, {{"x"}}};
  auto fwd = train_aligner(one, 1, AlignDirection::SourceToTarget);
  auto bwd = train_aligner(one, 1, AlignDirection::TargetToSource);
  CHECK(align({"a"}, {"x"}, fwd, bwd) == Alignment{{0, 0}});
  CHECK(align({"zz"}, {"x"}, fwd, bwd).empty());
  CHECK_THROWS_AS(align({"a"}, {"x"}, bwd, fwd), ContractError);
}

TEST_CASE("grow-diag-final-and containment") {
  Rng rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + trial % 6, m = 1 + (trial / 6) % 6;
    const auto s2t = random_links(rng, n, m, 0.3), t2s = random_links(rng, n, m, 0.3);
    const auto a = grow_diag_final_and(s2t, t2s, n, m);
    for (const auto& l : s2t)
      if (t2s.count(l)) CHECK(a.count(l));
    for (const auto& l : a) CHECK((s2t.count(l) || t2s.count(l)));
  }
  // Diagonal growth from an intersection point.
  const Alignment s2t{{0, 0}, {1, 1}}, t2s{{0, 0}};
  CHECK(grow_diag_final_and(s2t, t2s, 2, 2) == Alignment{{0, 0}, {1, 1}});
  CHECK_THROWS_AS(grow_diag_final_and({{2, 0}}, {{2, 0}}, 2, 2), ContractError);
}

TEST_CASE("pharaoh format") {
  const Alignment a{{0, 1}, {2, 0}, {2, 2}};
  CHECK(to_pharaoh(a) == "0-1 2-0 2-2");
  CHECK(parse_pharaoh("2-2 0-1  2-0") == a);
  CHECK(parse_pharaoh("").empty());
  CHECK_THROWS_AS(parse_pharaoh("0-"), IngestError);
  CHECK_THROWS_AS(parse_pharaoh("1x-2"), IngestError);
  const auto p = fs::temp_directory_path() / "ctxnmt_align.al";
  write_pharaoh(p, {a, {}, {{1, 1}}});
  auto back = read_pharaoh(p);
  REQUIRE(back.size() == 3);
  CHECK(back[0] == a);
  CHECK(back[1].empty());
}

TEST_CASE("word F1 examples") {
  TranslationPair p;
  p.source = {"the", "bank"};
  p.reference = {"der", "die", "ufer"};
  p.hypothesis = {"der", "ufer"};
  p.reference_alignment = {{0, 0}, {0, 1}, {1, 2}};
  p.hypothesis_alignment = {{0, 0}, {1, 1}};
  auto r = word_translation_f1({p}, {"the"});
  const auto& c = r.per_word.at("the");
  CHECK(c == WordCounts{1, 0, 1});
  CHECK(c.precision() == 1.0);
  CHECK(c.recall() == 0.5);
  CHECK(c.f1() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(word_translation_f1({p}, {"bank"}).micro.f1() == 1.0);

  TranslationPair q;
  q.source = {"bank"};
  q.reference = {"ufer"};
  q.hypothesis = {"geld"};
  q.reference_alignment = {};
  q.hypothesis_alignment = {{0, 0}};
  TranslationPair s = p;
  s.source = {"the"};
  s.reference_alignment = {{0, 0}, {0, 1}};
  s.hypothesis = {"der", "x"};
  s.hypothesis_alignment = {{0, 0}};
  // (1,0,1) on "the" and (0,1,0) on "bank".
  auto pooled = word_translation_f1({s, q}, {"the", "bank"});
  CHECK(pooled.micro.precision() == 0.5);
  CHECK(pooled.micro.recall() == 0.5);
  CHECK(pooled.micro.f1() == 0.5);

  auto absent = word_translation_f1({p}, {"crane", "the"}, {"the"});
  CHECK(absent.per_word.size() == 1);
  CHECK(absent.per_word.at("crane") == WordCounts{});
  CHECK(source_words({p, q}) == std::vector<std::string>{"bank", "the"});
}

TEST_CASE("micro F1 equals pooled brute force") {
  Rng rng(31);
  const std::vector<std::string> src_vocab{"a", "b", "c", "d"}, tgt_vocab{"u", "v", "w", "x", "y"};
  std::uniform_int_distribution<std::size_t> sw(0, 3), tw(0, 4);
  std::uniform_int_distribution<int> len(1, 5), npairs(1, 6);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<TranslationPair> pairs(static_cast<std::size_t>(npairs(rng)));
    for (auto& p : pairs) {
      for (int i = len(rng); i > 0; --i) p.source.push_back(src_vocab[sw(rng)]);
      for (int i = len(rng); i > 0; --i) p.reference.push_back(tgt_vocab[tw(rng)]);
      for (int i = len(rng); i > 0; --i) p.hypothesis.push_back(tgt_vocab[tw(rng)]);
      p.reference_alignment = random_links(rng, static_cast<int>(p.source.size()), static_cast<int>(p.reference.size()), 0.4);
      p.hypothesis_alignment = random_links(rng, static_cast<int>(p.source.size()), static_cast<int>(p.hypothesis.size()), 0.4);
    }
    const std::vector<std::string> words{"a", "c"};
    auto report = word_translation_f1(pairs, words);

    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& p : pairs)
      for (std::size_t i = 0; i < p.source.size(); ++i) {
        if (p.source[i] != "a" && p.source[i] != "c") continue;
        std::set<std::string> R, H;
        for (const auto& [s, t] : p.reference_alignment)
          if (s == static_cast<int>(i)) R.insert(p.reference[static_cast<std::size_t>(t)]);
        for (const auto& [s, t] : p.hypothesis_alignment)
          if (s == static_cast<int>(i)) H.insert(p.hypothesis[static_cast<std::size_t>(t)]);
        for (const auto& h : H) (R.count(h) ? tp : fp) += 1;
        for (const auto& r : R) fn += !H.count(r);
      }
    CHECK(report.micro == WordCounts{tp, fp, fn});
    const double P = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double Rc = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    CHECK(report.micro.f1() == (P + Rc > 0 ? 2 * P * Rc / (P + Rc) : 0.0));
    WordCounts sum;
    for (const auto& [w, c] : report.per_word) sum += c;
    CHECK(sum == report.micro);
  }
}

TEST_CASE("sense buckets") {
  SenseDictionary dict;
  dict.senses = {{"a", 1}, {"b", 2}, {"c", 3}, {"d", 4}, {"e", 4}, {"f", 6}, {"the", 9}};
  dict.stop_words = {"the"};
  SUBCASE("first window") {
    auto r = sense_bucket_report({{"a", 0.8}, {"b", 0.6}, {"c", 0.4}, {"d", 0.2}}, dict);
    REQUIRE(r.series.size() == 1);
    CHECK(r.series[0] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("single bucket") {
    auto r = sense_bucket_report({{"d", 0.3}, {"e", 0.5}, {"zz", 1.0}, {"the", 0.0}}, dict);
    REQUIRE(r.buckets.size() == 1);
    CHECK(r.buckets[0].words == 2);
    CHECK(r.series == std::vector<double>{0.4});
  }
  SUBCASE("constant series and window bounds") {
    std::map<std::string, double> f{{"a", 0.7}, {"b", 0.7}, {"c", 0.7}, {"d", 0.7}, {"f", 0.7}};
    auto r = sense_bucket_report(f, dict);
    REQUIRE(r.series.size() == 2);
    for (double v : r.series) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));
  }
  SUBCASE("direct recomputation on random inputs") {
    Rng rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> senses(1, 12);
    for (int trial = 0; trial < 200; ++trial) {
      SenseDictionary d;
      std::map<std::string, double> f;
      for (int w = 0; w < 15; ++w) {
        const std::string word = "w" + std::to_string(w);
        d.senses[word] = senses(rng);
        f[word] = u(rng);
      }
      auto r = sense_bucket_report(f, d);
      std::map<int, std::vector<double>> groups;
      for (const auto& [w, v] : f) groups[d.senses[w]].push_back(v);
      std::vector<double> means;
      for (const auto& [k, vs] : groups) {
        double s = 0.0;
        for (double v : vs) s += v;
        means.push_back(s / static_cast<double>(vs.size()));
      }
      std::vector<double> expected;
      if (means.size() < 4) {
        double s = 0.0;
        for (double m : means) s += m;
        expected.push_back(s / static_cast<double>(means.size()));
      } else {
        for (std::size_t i = 0; i + 4 <= means.size(); ++i)
          expected.push_back((means[i] + means[i + 1] + means[i + 2] + means[i + 3]) / 4.0);
        CHECK(r.series.size() == means.size() - 3);
      }
      CHECK(r.series == expected);
      for (std::size_t i = 0; i < r.series.size() && means.size() >= 4; ++i) {
        const auto [lo, hi] = std::minmax_element(means.begin() + static_cast<std::ptrdiff_t>(i), means.begin() + static_cast<std::ptrdiff_t>(i + 4));
        CHECK(r.series[i] >= *lo);
        CHECK(r.series[i] <= *hi);
      }
    }
  }
  CHECK_THROWS_AS(sense_bucket_report({{"zz", 1.0}, {"the", 0.5}}, dict), DomainError);
}

TEST_CASE("paired bootstrap") {
  HomographReport a, b;
  for (int i = 0; i < 50; ++i) {
    a.per_pair.push_back({static_cast<std::size_t>(i % 3), 1, static_cast<std::size_t>(i % 2)});
    b.per_pair.push_back({a.per_pair.back().tp + 1, 0, 0});
  }
  const double same = bootstrap_compare(a, a, 1000, 1);
  CHECK(same == doctest::Approx(0.5).epsilon(0.2));
  CHECK(bootstrap_compare(a, b, 1000, 1) == 0.0);
  CHECK(bootstrap_compare(b, a, 1000, 1) == 1.0);
  CHECK(bootstrap_compare(a, b, 500, 9) == bootstrap_compare(a, b, 500, 9));
  HomographReport one;
  one.per_pair.resize(1);
  CHECK_THROWS_AS(bootstrap_compare(one, one), DomainError);
  CHECK_THROWS_AS(bootstrap_compare(a, one), ContractError);
}

TEST_CASE("report output") {
  TranslationPair p;
  p.source = {"bank", "w"};
  p.reference = {"ufer", "v"};
  p.hypothesis = {"geld", "v"};
  p.reference_alignment = p.hypothesis_alignment = {{0, 0}, {1, 1}};
  auto r = word_translation_f1({p}, {"bank", "w"});
  SenseDictionary d;
  d.senses = {{"bank", 2}, {"w", 1}};
  std::map<std::string, double> f;
  for (const auto& [w, c] : r.per_word) f[w] = c.f1();
  auto buckets = sense_bucket_report(f, d);

  std::ostringstream tsv;
  write_report_tsv(tsv, r, &buckets);
  const std::string text = tsv.str();
  CHECK(text.starts_with("word\tTP\tFP\tFN\tP\tR\tF1\nbank\t0\t1\t1\t"));
  CHECK(text.find("\n#micro\t1\t1\t1\t0.500000\t0.500000\t0.500000\n") != std::string::npos);
  CHECK(text.find("#bucket\t0\t0.500000") != std::string::npos);
  const auto path = fs::temp_directory_path() / "ctxnmt_report.tsv";
  std::ofstream(path) << text;
  auto rows = read_report_tsv(path);
  CHECK(rows == r.per_word);

  std::ostringstream js;
  write_report_json(js, r, &buckets);
  auto j = nlohmann::json::parse(js.str());
  CHECK(j["micro"]["TP"] == 1);
  CHECK(j["words"]["w"]["F1"] == 1.0);
  CHECK(j["series"].size() == 1);
}
