#include "evlab/selector.hpp"

#include <cmath>
#include <cstdio>

#include "evlab/metrics.hpp"
#include "evlab/train.hpp"

namespace evlab {

const char* criterion_name(Criterion c) {
  return c == Criterion::ValidationAuroc ? "validation_auroc" : "density_band";
}

Criterion parse_criterion(const std::string& name) {
  if (name == "validation_auroc") return Criterion::ValidationAuroc;
  if (name == "density_band") return Criterion::DensityBand;
  throw ValidationError("unknown criterion '" + name +
                        "', expected validation_auroc or density_band");
}

namespace {

struct LabeledFrames {
  std::vector<EventFrame> frames;
  std::vector<Label> labels;
};

LabeledFrames synthesize(std::span<const SequenceDir> dirs, int th, EventMode mode) {
  LabeledFrames out;
  for (const auto& seq : dirs) {
    auto events = events_from_dir(seq.dir, th, mode);
    for (auto& ev : events) {
      out.frames.push_back(std::move(ev));
      out.labels.push_back(seq.label);
    }
  }
  return out;
}

double density_score(const LabeledFrames& data, double target) {
  double sum = 0.0;
  for (const auto& f : data.frames) sum += event_density(f);
  const double mean = sum / static_cast<double>(data.frames.size());
  return -std::abs(mean - target);
}

/// Every 4th frame of each class goes to validation, the rest train the
/// head. Deterministic by construction.
void split_holdout(const LabeledFrames& data, LabeledFrames& train, LabeledFrames& val) {
  std::size_t seen[2] = {0, 0};
  for (std::size_t i = 0; i < data.frames.size(); ++i) {
    const auto cls = static_cast<std::size_t>(data.labels[i]);
    LabeledFrames& dst = (seen[cls]++ % 4 == 3) ? val : train;
    dst.frames.push_back(data.frames[i]);
    dst.labels.push_back(data.labels[i]);
  }
}

bool has_both_classes(const LabeledFrames& d) {
  bool pos = false, neg = false;
  for (auto l : d.labels) (l == Label::Positive ? pos : neg) = true;
  return pos && neg;
}

double auroc_score(const LabeledFrames& data, int th, const SweepOptions& opts) {
  LabeledFrames train, val;
  split_holdout(data, train, val);
  if (!has_both_classes(train) || !has_both_classes(val))
    throw ValidationError("sweep: threshold " + std::to_string(th) +
                          " leaves a single-class split");

  ModelConfig cfg = opts.config;
  cfg.seed = opts.seed;
  const ParameterSet encoder = build_autoencoder(cfg);

  TrainOptions topt;
  topt.epochs = opts.budget;
  topt.seed = opts.seed;
  const TrainResult clf = train_classifier(encoder, train.frames, train.labels, cfg, topt);

  const std::vector<double> scores = classify_scores(clf.params, val.frames);
  std::vector<int> labels(val.labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    labels[i] = val.labels[i] == Label::Positive ? 1 : 0;
  return roc_curve(scores, labels).auroc;
}

}  // namespace

SweepResult sweep_thresholds(std::span<const SequenceDir> dirs, const SweepOptions& opts) {
  if (opts.candidates.empty()) throw ValidationError("sweep: no candidate thresholds");
  for (int th : opts.candidates)
    if (th < 1 || th > 255)
      throw ValidationError("sweep: candidate threshold " + std::to_string(th) +
                            " outside [1,255]");
  if (dirs.empty()) throw ValidationError("sweep: no input directories");

  SweepResult result;
  result.candidates = opts.candidates;
  for (int th : opts.candidates) {
    const LabeledFrames data = synthesize(dirs, th, opts.mode);
    const double value = opts.criterion == Criterion::DensityBand
                             ? density_score(data, opts.target_density)
                             : auroc_score(data, th, opts);
    result.values.push_back(value);
  }
  result.chosen = argmax_threshold(result);
  return result;
}

int argmax_threshold(const SweepResult& result) {
  if (result.candidates.empty() || result.candidates.size() != result.values.size())
    throw ValidationError("argmax_threshold: malformed sweep result");
  std::size_t best = 0;
  for (std::size_t i = 1; i < result.candidates.size(); ++i) {
    const bool better = result.values[i] > result.values[best];
    const bool tie_smaller = result.values[i] == result.values[best] &&
                             result.candidates[i] < result.candidates[best];
    if (better || tie_smaller) best = i;
  }
  return result.candidates[best];
}

std::string sweep_csv(const SweepResult& result, Criterion criterion) {
  std::string out = "threshold,criterion,value\n";
  char buf[80];
  for (std::size_t i = 0; i < result.candidates.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.17g\n", result.candidates[i],
                  criterion_name(criterion), result.values[i]);
    out += buf;
  }
  return out;
}

}  // namespace evlab
