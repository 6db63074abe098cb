#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "doctest.h"
#include "evlab/dataset.hpp"
#include "evlab/image.hpp"
#include "helpers.hpp"

// End-to-end checks against the installed binary (path injected by the build
// as EVLAB_BIN). Every invocation runs in a scratch directory; stdout/stderr
// are captured to files.

namespace fs = std::filesystem;
using namespace evlab;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  if (!fs::exists(p)) return {};
  const Bytes b = read_file(p);
  return std::string(b.begin(), b.end());
}

RunResult run(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd =
      std::string(EVLAB_BIN) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

void write_sequence(const fs::path& dir, int frames, std::uint8_t step,
                    std::uint64_t salt_seed = 0) {
  fs::create_directories(dir);
  Rng rng(salt_seed);
  GrayFrame f{16, 16, std::vector<std::uint8_t>(256, 80)};
  for (int i = 0; i < frames; ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "f%03d.pgm", i);
    save_pgm(f, dir / name);
    for (std::size_t p = 0; p < f.pixels.size(); ++p)
      if (rng.next_below(3) == 0)
        f.pixels[p] = static_cast<std::uint8_t>(f.pixels[p] + step);
  }
}

/// pos/neg sequences plus a ready-made event dataset under out/.
struct Workspace {
  helpers::TempDir tmp;
  fs::path manifest;

  Workspace() {
    write_sequence(tmp / "pos", 6, 60, 1);
    write_sequence(tmp / "neg", 6, 0, 2);
    const auto r = run("events --pos " + (tmp / "pos").string() + " --neg " +
                           (tmp / "neg").string() + " --th 8 --out " + (tmp / "out").string(),
                       tmp.path);
    REQUIRE(r.code == 0);
    manifest = tmp / "out" / "manifest.tsv";
  }
};

}  // namespace

TEST_CASE("events synthesizes a dataset and reports the counts") {
  helpers::TempDir tmp;
  write_sequence(tmp / "pos", 5, 50, 3);
  write_sequence(tmp / "neg", 4, 0, 4);
  const auto r = run("events --pos " + (tmp / "pos").string() + " --neg " +
                         (tmp / "neg").string() + " --th 10 --out " + (tmp / "o").string(),
                     tmp.path);
  CHECK(r.code == 0);
  CHECK(r.out.find("entries=7") != std::string::npos);  // 4 + 3
  CHECK(r.out.find("positive=4") != std::string::npos);

  const auto manifest = read_manifest(tmp / "o" / "manifest.tsv");
  CHECK(manifest.entries.size() == 7);
  for (const auto& e : manifest.entries) CHECK(e.threshold == 10);

  SUBCASE("a second run reproduces every byte") {
    const auto again = run("events --pos " + (tmp / "pos").string() + " --neg " +
                               (tmp / "neg").string() + " --th 10 --out " +
                               (tmp / "o2").string(),
                           tmp.path);
    REQUIRE(again.code == 0);
    CHECK(read_file(tmp / "o" / "manifest.tsv") == read_file(tmp / "o2" / "manifest.tsv"));
    for (const auto& e : manifest.entries)
      CHECK(read_file(tmp / "o" / e.path) == read_file(tmp / "o2" / e.path));
  }
}

TEST_CASE("events requires at least one input directory") {
  helpers::TempDir tmp;
  const auto r = run("events --th 8 --out " + (tmp / "o").string(), tmp.path);
  CHECK(r.code == 2);
  CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("the full train-eval-bench loop works through the binary") {
  Workspace ws;
  const fs::path ae = ws.tmp / "ae.eaw";
  const std::string base = "--manifest " + ws.manifest.string();

  const auto train = run("train-ae " + base + " --out " + ae.string() +
                             " --input-size 16 --epochs 2 --batch 4 --seed 9",
                         ws.tmp.path);
  REQUIRE(train.code == 0);
  CHECK(train.out.find("final_loss=") != std::string::npos);
  CHECK(fs::exists(ae));
  CHECK(fs::exists(ws.tmp / "ae.eaw.loss.csv"));
  const std::string loss_csv = slurp(ws.tmp / "ae.eaw.loss.csv");
  CHECK(loss_csv.rfind("epoch,loss\n", 0) == 0);
  CHECK(std::count(loss_csv.begin(), loss_csv.end(), '\n') == 3);

  SUBCASE("training is reproducible byte for byte") {
    const auto again = run("train-ae " + base + " --out " + (ws.tmp / "ae2.eaw").string() +
                               " --input-size 16 --epochs 2 --batch 4 --seed 9",
                           ws.tmp.path);
    REQUIRE(again.code == 0);
    CHECK(read_file(ae) == read_file(ws.tmp / "ae2.eaw"));
  }

  SUBCASE("params prints both counts") {
    const auto p = run("params --weights " + ae.string(), ws.tmp.path);
    CHECK(p.code == 0);
    CHECK(p.out.find("total=") != std::string::npos);
    CHECK(p.out.find("trainable=") != std::string::npos);
  }

  SUBCASE("eval on autoencoder weights reports reconstruction accuracy") {
    const auto e = run("eval --weights " + ae.string() + " " + base, ws.tmp.path);
    CHECK(e.code == 0);
    CHECK(e.out.find("reconstruction_accuracy=") != std::string::npos);
  }

  SUBCASE("probe writes the mi csv") {
    const auto p = run("probe --weights " + ae.string() + " " + base + " --bins 4 --out " +
                           (ws.tmp / "mi.csv").string(),
                       ws.tmp.path);
    CHECK(p.code == 0);
    const std::string csv = slurp(ws.tmp / "mi.csv");
    CHECK(csv.rfind("# mode=coarsening", 0) == 0);
    CHECK(csv.find("enc.conv1,") != std::string::npos);
    CHECK(csv.find("dec.conv4,") != std::string::npos);

    const auto to_stdout =
        run("probe --weights " + ae.string() + " " + base + " --bins 4 --mode raw",
            ws.tmp.path);
    CHECK(to_stdout.code == 0);
    CHECK(to_stdout.out.rfind("# mode=raw", 0) == 0);
  }

  const fs::path clf = ws.tmp / "clf.eaw";
  const auto tc = run("train-clf --weights " + ae.string() + " " + base + " --out " +
                          clf.string() + " --epochs 6 --batch 4",
                      ws.tmp.path);
  REQUIRE(tc.code == 0);

  SUBCASE("eval on classifier weights emits the summary and roc csv") {
    const auto e = run("eval --weights " + clf.string() + " " + base + " --roc-out " +
                           (ws.tmp / "roc.csv").string(),
                       ws.tmp.path);
    CHECK(e.code == 0);
    CHECK(e.out.find("accuracy=") != std::string::npos);
    CHECK(e.out.find("auroc=") != std::string::npos);
    CHECK(slurp(ws.tmp / "roc.csv").rfind("fpr,tpr\n", 0) == 0);
  }

  SUBCASE("bench prints one line and can dump latencies") {
    const auto b = run("bench --weights " + clf.string() + " --warmup 2 --iters 10" +
                           " --latency-out " + (ws.tmp / "lat.csv").string(),
                       ws.tmp.path);
    CHECK(b.code == 0);
    CHECK(b.out.find("fps") != std::string::npos);
    CHECK(slurp(ws.tmp / "lat.csv").rfind("iter,latency_ms\n", 0) == 0);
  }
}

TEST_CASE("select reports the chosen threshold") {
  helpers::TempDir tmp;
  write_sequence(tmp / "pos", 5, 60, 5);
  write_sequence(tmp / "neg", 5, 0, 6);
  const auto r = run("select --pos " + (tmp / "pos").string() + " --neg " +
                         (tmp / "neg").string() +
                         " --candidates 8,32,128 --criterion density_band --out " +
                         (tmp / "sweep.csv").string(),
                     tmp.path);
  CHECK(r.code == 0);
  CHECK(r.out.find("chosen=") != std::string::npos);
  const std::string csv = slurp(tmp / "sweep.csv");
  CHECK(csv.rfind("threshold,criterion,value\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("usage problems exit 1, runtime failures exit 2") {
  helpers::TempDir tmp;
  CHECK(run("", tmp.path).code == 1);                       // subcommand required
  CHECK(run("frobnicate", tmp.path).code == 1);             // unknown subcommand
  CHECK(run("train-ae", tmp.path).code == 1);               // missing required options
  CHECK(run("events --th 300 --out x", tmp.path).code == 1);  // range check

  const auto help = run("--help", tmp.path);
  CHECK(help.code == 0);
  CHECK(help.out.find("events") != std::string::npos);
  CHECK(run("train-ae --help", tmp.path).code == 0);

  const auto missing = run("params --weights " + (tmp / "nope.eaw").string(), tmp.path);
  CHECK(missing.code == 2);
  CHECK(missing.err.find("error:") != std::string::npos);
}

TEST_CASE("eval refuses a single-class manifest for classifiers") {
  helpers::TempDir tmp;
  write_sequence(tmp / "pos_only", 6, 60, 7);
  const auto ev = run("events --pos " + (tmp / "pos_only").string() + " --th 8 --out " +
                          (tmp / "o").string(),
                      tmp.path);
  REQUIRE(ev.code == 0);
  const std::string base = "--manifest " + (tmp / "o" / "manifest.tsv").string();
  const auto ae = run("train-ae " + base + " --out " + (tmp / "ae.eaw").string() +
                          " --input-size 16 --epochs 1 --batch 4",
                      tmp.path);
  REQUIRE(ae.code == 0);
  const auto clf = run("train-clf --weights " + (tmp / "ae.eaw").string() + " " + base +
                           " --out " + (tmp / "clf.eaw").string() + " --epochs 1",
                       tmp.path);
  CHECK(clf.code == 2);  // single class cannot train a classifier either
  CHECK(clf.err.find("error:") != std::string::npos);
}

TEST_CASE("config files feed options and flags override them") {
  Workspace ws;
  write_file_atomic(ws.tmp / "train.cfg",
                    std::string("[train-ae]\ninput-size=16\nepochs=3\nbatch=4\n"));

  const auto from_cfg = run("train-ae --manifest " + ws.manifest.string() + " --out " +
                                (ws.tmp / "a.eaw").string() + " --config " +
                                (ws.tmp / "train.cfg").string(),
                            ws.tmp.path);
  REQUIRE(from_cfg.code == 0);
  const std::string loss_a = slurp(ws.tmp / "a.eaw.loss.csv");
  CHECK(std::count(loss_a.begin(), loss_a.end(), '\n') == 4);  // header + 3

  const auto overridden = run("train-ae --manifest " + ws.manifest.string() + " --out " +
                                  (ws.tmp / "b.eaw").string() + " --config " +
                                  (ws.tmp / "train.cfg").string() + " --epochs 1",
                              ws.tmp.path);
  REQUIRE(overridden.code == 0);
  const std::string loss_b = slurp(ws.tmp / "b.eaw.loss.csv");
  CHECK(std::count(loss_b.begin(), loss_b.end(), '\n') == 2);  // header + 1

  write_file_atomic(ws.tmp / "bad.cfg", std::string("[train-ae]\ninput-size=16\nturbo=yes\n"));
  const auto bad = run("train-ae --manifest " + ws.manifest.string() + " --out " +
                           (ws.tmp / "c.eaw").string() + " --config " +
                           (ws.tmp / "bad.cfg").string(),
                       ws.tmp.path);
  CHECK(bad.code == 1);
}
