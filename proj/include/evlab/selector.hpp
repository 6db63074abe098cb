#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evlab/dataset.hpp"
#include "evlab/model.hpp"

// Dataset-level threshold selection: score every candidate Th and pick the
// argmax, ties going to the smaller threshold (lower thresholds keep more
// events). The validation_auroc criterion synthesizes events per candidate,
// trains a budget-limited classifier head on a frozen random encoder, and
// scores AUROC on a held-out split; density_band is a model-free proxy that
// prefers a mean event density near a target.

namespace evlab {

enum class Criterion : std::uint8_t { ValidationAuroc, DensityBand };

const char* criterion_name(Criterion c);
Criterion parse_criterion(const std::string& name);

struct SweepOptions {
  std::vector<int> candidates;
  Criterion criterion = Criterion::ValidationAuroc;
  EventMode mode = EventMode::Successive;
  std::uint32_t budget = 10;  // training epochs per candidate
  std::uint64_t seed = 1;
  double target_density = 0.05;
  ModelConfig config;
};

struct SweepResult {
  std::vector<int> candidates;
  std::vector<double> values;
  int chosen = 0;
};

SweepResult sweep_thresholds(std::span<const SequenceDir> dirs, const SweepOptions& opts);

/// Pure re-selection from the stored scores; same tie rule.
int argmax_threshold(const SweepResult& result);

/// CSV `threshold,criterion,value`.
std::string sweep_csv(const SweepResult& result, Criterion criterion);

}  // namespace evlab
