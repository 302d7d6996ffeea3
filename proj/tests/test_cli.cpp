#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = CTXNMT_FIXTURES;

fs::path work() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "ctxnmt_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Run {
  int code;
  std::string out;
};

Run cli(const std::string& args) {
  const auto log = work() / "last.out";
  const std::string cmd = std::string("\"") + CTXNMT_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("help lists every config key with its default") {
  const auto r = cli("--help");
  CHECK(r.code == 0);
  for (const char* key : {"lr", "clip_norm", "batch_size", "max_length", "dropout", "beam", "src_vocab_size", "seed"})
    CHECK(r.out.find(key) != std::string::npos);
  CHECK(r.out.find("50000") != std::string::npos);
  CHECK(r.out.find("0.3") != std::string::npos);
  for (const char* sub : {"build-vocab", "gen-synthetic", "train", "translate", "score-bleu", "align", "eval-homograph",
                          "bucket-report", "grad-check"})
    CHECK(r.out.find(sub) != std::string::npos);
}

TEST_CASE("validation errors exit with 1") {
  CHECK(cli("").code == 1);
  CHECK(cli("frobnicate").code == 1);
  auto r = cli("train --config " + q(kFixtures / "toy.cfg") + " --set bogus=1 --out-dir " + q(work() / "bad"));
  CHECK(r.code == 1);
  CHECK(r.out.find("bogus") != std::string::npos);
  r = cli("score-bleu --ref " + q(work() / "nope.txt") + " --hyp " + q(kFixtures / "toy.tgt"));
  CHECK(r.code == 1);
  CHECK(r.out.find("nope.txt") != std::string::npos);

  const auto bad_cfg = work() / "bad.cfg";
  std::ofstream(bad_cfg) << "embed_dim = 8\n\nwidth = 3\n";
  r = cli("train --config " + q(bad_cfg) + " --out-dir " + q(work() / "bad"));
  CHECK(r.code == 1);
  CHECK(r.out.find("line 3") != std::string::npos);
  CHECK(r.out.find("width") != std::string::npos);
}

TEST_CASE("runtime failures exit with 2") {
  const auto r = cli("train --config " + q(kFixtures / "toy.cfg") + " --set lr=1e300 --set clip_norm=1e300 --out-dir " +
                     q(work() / "diverge"));
  CHECK(r.code == 2);
  CHECK(r.out.find("diverged") != std::string::npos);
}

TEST_CASE("score-bleu") {
  const auto r = cli("score-bleu --ref " + q(kFixtures / "toy.tgt") + " --hyp " + q(kFixtures / "toy.tgt"));
  CHECK(r.code == 0);
  CHECK(r.out == "1.0000\n");
}

TEST_CASE("train is deterministic and writes its outputs") {
  const auto a = work() / "train_a", b = work() / "train_b";
  for (const auto& dir : {a, b})
    REQUIRE(cli("train --config " + q(kFixtures / "toy.cfg") + " --seed 7 --out-dir " + q(dir)).code == 0);
  for (const char* f : {"epoch1.ckpt", "epoch2.ckpt", "epoch3.ckpt", "model.ckpt", "train_log.tsv", "run.log",
                        "resolved.cfg", "src.vocab", "tgt.vocab"}) {
    CHECK(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(slurp(a / "model.ckpt") == slurp(a / "epoch3.ckpt"));
  CHECK(slurp(a / "resolved.cfg").find("seed = 7\n") != std::string::npos);
  CHECK(slurp(a / "train_log.tsv").rfind("epoch\ttrain_loss\tdev_ppl\tlr\tseconds\n", 0) == 0);

  const auto c = work() / "train_c";
  REQUIRE(cli("train --config " + q(kFixtures / "toy.cfg") + " --seed 8 --out-dir " + q(c)).code == 0);
  CHECK(slurp(a / "model.ckpt") != slurp(c / "model.ckpt"));

  const auto f = work() / "train_f";
  REQUIRE(cli("train --config " + q(kFixtures / "toy.cfg") + " --set precision=float --set max_epochs=1 --out-dir " + q(f))
              .code == 0);
  const auto hyp = work() / "tr_f" / "hyp.txt";
  CHECK(cli("translate --model " + q(f / "model.ckpt") + " --input " + q(kFixtures / "toy.src") + " --output " + q(hyp))
            .code == 0);
}

TEST_CASE("translate, align and evaluate end to end") {
  const auto model = work() / "train_a" / "model.ckpt";
  REQUIRE(fs::exists(model));
  const auto out = work() / "pipe";
  const auto hyp = out / "hyp.txt";
  REQUIRE(cli("translate --model " + q(model) + " --input " + q(kFixtures / "toy.src") + " --output " + q(hyp) +
              " --beam 3")
              .code == 0);
  std::ifstream in(hyp);
  std::size_t lines = 0;
  for (std::string s; std::getline(in, s);) ++lines;
  CHECK(lines == 50);
  CHECK(fs::exists(out / "resolved.cfg"));
  CHECK(fs::exists(out / "run.log"));
  CHECK(cli("score-bleu --ref " + q(kFixtures / "toy.tgt") + " --hyp " + q(hyp)).code == 0);

  const auto ref_al = out / "ref.align", hyp_al = out / "hyp.align";
  REQUIRE(cli("align --src " + q(kFixtures / "toy.src") + " --tgt " + q(kFixtures / "toy.tgt") + " --output " + q(ref_al))
              .code == 0);
  REQUIRE(cli("align --src " + q(kFixtures / "toy.src") + " --tgt " + q(hyp) + " --pool-src " +
              q(kFixtures / "toy.src") + " --pool-tgt " + q(kFixtures / "toy.tgt") + " --output " + q(hyp_al))
              .code == 0);
  const auto words = out / "words.txt", senses = out / "senses.tsv";
  std::ofstream(words) << "dog\ncat\nbird\n";
  std::ofstream(senses) << "dog\t1\ncat\t2\nbird\t3\n";
  const auto report = out / "report.tsv";
  auto r = cli("eval-homograph --src " + q(kFixtures / "toy.src") + " --ref " + q(kFixtures / "toy.tgt") + " --hyp " +
               q(hyp) + " --ref-align " + q(ref_al) + " --hyp-align " + q(hyp_al) + " --homographs " + q(words) +
               " --senses " + q(senses) + " --output " + q(report) + " --json " + q(out / "report.json"));
  CHECK(r.code == 0);
  const auto text = slurp(report);
  CHECK(text.rfind("word\tTP\tFP\tFN\tP\tR\tF1\n", 0) == 0);
  CHECK(text.find("\n#micro\t") != std::string::npos);
  CHECK(text.find("\n#bucket\t0\t") != std::string::npos);
  r = cli("bucket-report --report " + q(report) + " --senses " + q(senses));
  CHECK(r.code == 0);
  CHECK(r.out.find("#bucket\t0\t") != std::string::npos);

  // Self-evaluation is perfect.
  r = cli("eval-homograph --src " + q(kFixtures / "toy.src") + " --ref " + q(kFixtures / "toy.tgt") + " --hyp " +
          q(kFixtures / "toy.tgt") + " --ref-align " + q(ref_al) + " --hyp-align " + q(ref_al) + " --output " +
          q(out / "self.tsv"));
  CHECK(r.out == "micro F1 1.0000\n");
}

TEST_CASE("gen-synthetic, build-vocab and grad-check") {
  const auto dir = work() / "syn";
  REQUIRE(cli("gen-synthetic --out-dir " + q(dir) + " --train-pairs 40 --test-pairs 10 --seed 5").code == 0);
  for (const char* f : {"train.src", "train.tgt", "train.labels", "test.src", "test.tgt", "test.labels",
                        "homographs.txt", "senses.tsv", "resolved.cfg", "run.log"})
    CHECK(fs::exists(dir / f));
  const auto again = work() / "syn2";
  REQUIRE(cli("gen-synthetic --out-dir " + q(again) + " --train-pairs 40 --test-pairs 10 --seed 5").code == 0);
  CHECK(slurp(dir / "train.src") == slurp(again / "train.src"));
  CHECK(slurp(dir / "test.labels") == slurp(again / "test.labels"));

  auto r = cli("build-vocab --input " + q(dir / "train.src") + " --size 10 --output " + q(work() / "v.txt"));
  CHECK(r.code == 0);
  CHECK(r.out == "15 entries\n");

  r = cli("grad-check --set embed_dim=4 --set hidden=4 --set encoder=uni --set context=holstm --set integration=gate");
  CHECK(r.code == 0);
  CHECK(r.out.find("max relative error") != std::string::npos);
}
