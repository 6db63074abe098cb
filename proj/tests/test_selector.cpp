#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "evlab/selector.hpp"
#include "helpers.hpp"

using namespace evlab;

namespace {

// Sequences whose inter-frame steps are chosen per class so that candidate
// thresholds behave predictably: positives jump by `pos_step`, negatives by
// `neg_step` on a per-pixel random subset.
void write_class_dir(const std::filesystem::path& dir, std::size_t frames,
                     std::uint8_t step, double flip_fraction, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  Rng rng(seed);
  GrayFrame f{16, 16, std::vector<std::uint8_t>(256, 100)};
  for (std::size_t i = 0; i < frames; ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "f%03zu.pgm", i);
    save_pgm(f, dir / name);
    for (auto& p : f.pixels)
      if (rng.next_double() < flip_fraction)
        p = static_cast<std::uint8_t>(p >= 128 ? p - step : p + step);
  }
}

struct Corpus {
  helpers::TempDir tmp;
  std::vector<SequenceDir> dirs;
};

Corpus separable_corpus() {
  Corpus c;
  // positives change a third of their pixels by 40, negatives a tenth by 12
  write_class_dir(c.tmp / "pos_a", 9, 40, 0.33, 1);
  write_class_dir(c.tmp / "pos_b", 9, 40, 0.33, 2);
  write_class_dir(c.tmp / "neg_a", 9, 12, 0.10, 3);
  write_class_dir(c.tmp / "neg_b", 9, 12, 0.10, 4);
  c.dirs = {{c.tmp / "pos_a", Label::Positive},
            {c.tmp / "pos_b", Label::Positive},
            {c.tmp / "neg_a", Label::Negative},
            {c.tmp / "neg_b", Label::Negative}};
  return c;
}

ModelConfig sweep_config() {
  ModelConfig c;
  c.input_size = 16;
  c.base_channels = {4, 6, 8};
  c.fc_hidden = 8;
  return c;
}

}  // namespace

TEST_CASE("criterion names parse both ways") {
  CHECK(parse_criterion("validation_auroc") == Criterion::ValidationAuroc);
  CHECK(parse_criterion("density_band") == Criterion::DensityBand);
  CHECK(criterion_name(Criterion::DensityBand) == std::string("density_band"));
  CHECK_THROWS_AS(parse_criterion("vibes"), ValidationError);
}

TEST_CASE("density_band picks the threshold closest to the target density") {
  const auto corpus = separable_corpus();
  SweepOptions opts;
  opts.criterion = Criterion::DensityBand;
  opts.candidates = {1, 20, 60};
  opts.target_density = 0.05;
  opts.config = sweep_config();
  const auto r = sweep_thresholds(corpus.dirs, opts);

  REQUIRE(r.candidates == std::vector<int>{1, 20, 60});
  REQUIRE(r.values.size() == 3);
  // Th=1 fires on every changed pixel (~21% mean density), Th=20 keeps only
  // the strong class (~16%), Th=60 fires nowhere.
  CHECK(r.values[2] == doctest::Approx(-0.05));
  for (double v : r.values) CHECK(v <= 0.0);
  CHECK(r.chosen == r.candidates[static_cast<std::size_t>(
                        std::max_element(r.values.begin(), r.values.end()) -
                        r.values.begin())]);
}

TEST_CASE("a single candidate is returned as chosen") {
  const auto corpus = separable_corpus();
  SweepOptions opts;
  opts.criterion = Criterion::DensityBand;
  opts.candidates = {17};
  opts.config = sweep_config();
  const auto r = sweep_thresholds(corpus.dirs, opts);
  CHECK(r.chosen == 17);
  CHECK(r.values.size() == 1);
}

TEST_CASE("exact ties resolve to the smaller threshold") {
  SweepResult r;
  r.candidates = {8, 4, 12};
  r.values = {0.5, 0.5, 0.25};
  CHECK(argmax_threshold(r) == 4);

  r.values = {0.5, 0.5, 0.5};
  CHECK(argmax_threshold(r) == 4);

  r.values = {0.1, 0.2, 0.9};
  CHECK(argmax_threshold(r) == 12);

  r.values.pop_back();
  CHECK_THROWS_AS(argmax_threshold(r), ValidationError);
  CHECK_THROWS_AS(argmax_threshold(SweepResult{}), ValidationError);
}

TEST_CASE("candidate order does not change the choice") {
  const auto corpus = separable_corpus();
  SweepOptions opts;
  opts.criterion = Criterion::DensityBand;
  opts.candidates = {1, 20, 60};
  opts.config = sweep_config();
  const auto a = sweep_thresholds(corpus.dirs, opts);
  opts.candidates = {60, 1, 20};
  const auto b = sweep_thresholds(corpus.dirs, opts);
  CHECK(a.chosen == b.chosen);

  // and the reported values follow the candidates' order
  for (std::size_t i = 0; i < 3; ++i) {
    const auto pos = std::find(b.candidates.begin(), b.candidates.end(), a.candidates[i]);
    REQUIRE(pos != b.candidates.end());
    CHECK(a.values[i] ==
          b.values[static_cast<std::size_t>(pos - b.candidates.begin())]);
  }
}

TEST_CASE("validation_auroc separates an easy corpus") {
  const auto corpus = separable_corpus();
  SweepOptions opts;
  opts.criterion = Criterion::ValidationAuroc;
  opts.candidates = {8, 200};
  opts.budget = 8;
  opts.seed = 9;
  opts.config = sweep_config();
  const auto r = sweep_thresholds(corpus.dirs, opts);

  // Th=200 erases every event, so nothing distinguishes the classes; Th=8
  // keeps the density gap and the head learns it.
  REQUIRE(r.values.size() == 2);
  CHECK(r.values[0] > r.values[1]);
  CHECK(r.values[0] > 0.8);
  CHECK(r.chosen == 8);
  for (double v : r.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  SUBCASE("the sweep is deterministic") {
    const auto again = sweep_thresholds(corpus.dirs, opts);
    CHECK(again.values == r.values);
    CHECK(again.chosen == r.chosen);
  }
}

TEST_CASE("single-class corpora are rejected by the auroc criterion") {
  helpers::TempDir tmp;
  write_class_dir(tmp / "only", 9, 30, 0.3, 5);
  const std::vector<SequenceDir> dirs = {{tmp / "only", Label::Positive}};
  SweepOptions opts;
  opts.criterion = Criterion::ValidationAuroc;
  opts.candidates = {8};
  opts.config = sweep_config();
  CHECK_THROWS_WITH_AS(sweep_thresholds(dirs, opts),
                       doctest::Contains("single-class split"), ValidationError);
  CHECK_THROWS_WITH_AS(sweep_thresholds(dirs, opts), doctest::Contains("threshold 8"),
                       ValidationError);
}

TEST_CASE("sweep validates candidates and inputs") {
  const auto corpus = separable_corpus();
  SweepOptions opts;
  opts.config = sweep_config();
  CHECK_THROWS_AS(sweep_thresholds(corpus.dirs, opts), ValidationError);  // no candidates
  opts.candidates = {0};
  CHECK_THROWS_AS(sweep_thresholds(corpus.dirs, opts), ValidationError);
  opts.candidates = {256};
  CHECK_THROWS_AS(sweep_thresholds(corpus.dirs, opts), ValidationError);
  opts.candidates = {8};
  CHECK_THROWS_AS(sweep_thresholds(std::vector<SequenceDir>{}, opts), ValidationError);
}

TEST_CASE("the csv report lists one row per candidate") {
  SweepResult r;
  r.candidates = {4, 8};
  r.values = {-0.25, -0.125};
  r.chosen = 8;
  const std::string csv = sweep_csv(r, Criterion::DensityBand);
  CHECK(csv.rfind("threshold,criterion,value\n", 0) == 0);
  CHECK(csv.find("4,density_band,-0.25\n") != std::string::npos);
  CHECK(csv.find("8,density_band,-0.125\n") != std::string::npos);
}
