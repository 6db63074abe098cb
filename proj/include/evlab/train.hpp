#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "evlab/dataset.hpp"
#include "evlab/model.hpp"

// Mini-batch Adam training for the autoencoder and the classifier head.
// Everything is single threaded and seeded, so a (dataset, config, options)
// triple always produces the same bytes.

namespace evlab {

struct TrainReport {
  std::vector<double> epoch_loss;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  bool stopped_early = false;

  double final_loss() const { return epoch_loss.empty() ? 0.0 : epoch_loss.back(); }
};

struct TrainOptions {
  std::uint32_t epochs = 10;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  /// Optional early-stop hook, called after each epoch with the live model.
  std::function<bool(const ParameterSet&, const TrainReport&)> stop_after_epoch;
};

struct TrainResult {
  ParameterSet params;
  TrainReport report;
};

/// Decodes every manifest entry. The returned labels parallel the frames.
std::pair<std::vector<EventFrame>, std::vector<Label>> load_event_frames(
    const DatasetManifest& manifest);

TrainResult train_autoencoder(std::span<const EventFrame> frames, const ModelConfig& config,
                              const TrainOptions& opts);
TrainResult train_autoencoder(const DatasetManifest& manifest, const ModelConfig& config,
                              const TrainOptions& opts);

/// Builds a classifier on the (frozen) encoder of `encoder_src` and trains
/// only the head, against binary cross-entropy on cached latents.
TrainResult train_classifier(const ParameterSet& encoder_src,
                             std::span<const EventFrame> frames, std::span<const Label> labels,
                             const ModelConfig& config, const TrainOptions& opts);
TrainResult train_classifier(const ParameterSet& encoder_src, const DatasetManifest& manifest,
                             const ModelConfig& config, const TrainOptions& opts);

/// Mean, over frames, of the per-pixel agreement between the thresholded
/// reconstruction (>= 0.5) and the input mask.
double reconstruction_accuracy(const ParameterSet& ps, std::span<const EventFrame> frames);
double reconstruction_accuracy(const ParameterSet& ps, const DatasetManifest& manifest);

/// Classifier probability per frame.
std::vector<double> classify_scores(const ParameterSet& ps, std::span<const EventFrame> frames);

}  // namespace evlab
