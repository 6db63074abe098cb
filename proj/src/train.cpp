#include "evlab/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "evlab/ops.hpp"

namespace evlab {

std::pair<std::vector<EventFrame>, std::vector<Label>> load_event_frames(
    const DatasetManifest& manifest) {
  std::vector<EventFrame> frames;
  std::vector<Label> labels;
  frames.reserve(manifest.entries.size());
  for (const auto& entry : manifest.entries) {
    frames.push_back(load_evf_file(manifest.resolve(entry)));
    labels.push_back(entry.label);
  }
  return {std::move(frames), std::move(labels)};
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<Tensor> cache_frame_tensors(std::span<const EventFrame> frames, std::size_t size) {
  std::vector<Tensor> cache;
  cache.reserve(frames.size());
  for (const auto& f : frames) cache.push_back(frame_to_tensor(f, size));
  return cache;
}

Tensor gather_batch(const std::vector<Tensor>& cache, std::span<const std::size_t> idx,
                    std::size_t size) {
  Tensor batch({idx.size(), 1, size, size});
  const std::size_t plane = size * size;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const Tensor& src = cache[idx[i]];
    std::copy(src.data.begin(), src.data.end(), batch.data.begin() + i * plane);
  }
  return batch;
}

/// Adam over the trainable tensors of a parameter set, one state per tensor.
struct Optimizer {
  double lr;
  std::vector<ops::AdamState<float>> states;

  explicit Optimizer(const ParameterSet& ps, double lr_) : lr(lr_), states(ps.tensors.size()) {}

  void step(ParameterSet& ps) {
    for (std::size_t i = 0; i < ps.tensors.size(); ++i) {
      auto& nt = ps.tensors[i];
      if (nt.frozen || !nt.tensor.has_grad()) continue;
      ops::adam_step<float>(nt.tensor.data, nt.tensor.grad, states[i], lr);
    }
  }
};

void check_finite(double loss, std::uint32_t epoch, std::size_t batch) {
  if (!std::isfinite(loss))
    throw Error("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                ", batch " + std::to_string(batch));
}

}  // namespace

TrainResult train_autoencoder(std::span<const EventFrame> frames, const ModelConfig& config,
                              const TrainOptions& opts) {
  if (frames.empty()) throw ValidationError("train_autoencoder: no frames");
  if (opts.batch_size == 0) throw ValidationError("train_autoencoder: batch_size must be positive");
  const auto start = Clock::now();

  ModelConfig cfg = config;
  cfg.seed = opts.seed;
  TrainResult result;
  result.params = build_autoencoder(cfg);
  result.report.seed = opts.seed;

  const std::size_t size = cfg.input_size;
  const auto cache = cache_frame_tensors(frames, size);
  const auto layers = autoencoder_layers();
  Optimizer opt(result.params, opts.lr);
  Rng shuffle_rng(~opts.seed);

  std::vector<std::size_t> order(frames.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::uint32_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t pos = 0; pos < order.size(); pos += opts.batch_size) {
      const std::size_t n = std::min(opts.batch_size, order.size() - pos);
      const Tensor batch = gather_batch(cache, {order.data() + pos, n}, size);
      result.params.zero_grads();
      Trace trace;
      const Tensor out = run_layers(result.params, layers, batch, &trace);
      const auto loss = cfg.loss == LossKind::Bce ? ops::bce_loss(out, batch)
                                                  : ops::mse_loss(out, batch);
      check_finite(loss.value, epoch, pos / opts.batch_size);
      backward_layers(result.params, layers, trace, batch, loss.grad);
      opt.step(result.params);
      loss_sum += loss.value * static_cast<double>(n);
    }
    result.report.epoch_loss.push_back(loss_sum / static_cast<double>(frames.size()));
    if (opts.stop_after_epoch && opts.stop_after_epoch(result.params, result.report)) {
      result.report.stopped_early = true;
      break;
    }
  }
  result.report.wall_seconds = seconds_since(start);
  return result;
}

TrainResult train_autoencoder(const DatasetManifest& manifest, const ModelConfig& config,
                              const TrainOptions& opts) {
  auto [frames, labels] = load_event_frames(manifest);
  return train_autoencoder(frames, config, opts);
}

TrainResult train_classifier(const ParameterSet& encoder_src,
                             std::span<const EventFrame> frames, std::span<const Label> labels,
                             const ModelConfig& config, const TrainOptions& opts) {
  if (frames.size() != labels.size())
    throw ValidationError("train_classifier: frame/label count mismatch");
  if (frames.empty()) throw ValidationError("train_classifier: no frames");
  if (opts.batch_size == 0) throw ValidationError("train_classifier: batch_size must be positive");
  const bool has_pos = std::find(labels.begin(), labels.end(), Label::Positive) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), Label::Negative) != labels.end();
  if (!has_pos || !has_neg)
    throw ValidationError("train_classifier: need both positive and negative examples");

  const auto start = Clock::now();
  ModelConfig cfg = config;
  cfg.seed = opts.seed;
  TrainResult result;
  result.params = build_classifier(encoder_src, cfg);
  result.report.seed = opts.seed;

  // The encoder is frozen, so each frame's latent is computed once up front
  // and head training runs on the cached rows.
  const std::size_t size = cfg.input_size;
  const std::size_t feat = cfg.latent_numel();
  const auto enc = encoder_layers();
  Tensor latents({frames.size(), feat});
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Tensor one = run_layers(result.params, enc, frame_to_tensor(frames[i], size));
    std::copy(one.data.begin(), one.data.end(), latents.data.begin() + i * feat);
  }

  const auto head = classifier_head_layers();
  Optimizer opt(result.params, opts.lr);
  Rng shuffle_rng(~opts.seed);
  std::vector<std::size_t> order(frames.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::uint32_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t pos = 0; pos < order.size(); pos += opts.batch_size) {
      const std::size_t n = std::min(opts.batch_size, order.size() - pos);
      Tensor batch({n, feat});
      Tensor target({n, 1});
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t src = order[pos + i];
        std::copy(latents.data.begin() + src * feat, latents.data.begin() + (src + 1) * feat,
                  batch.data.begin() + i * feat);
        target.data[i] = labels[src] == Label::Positive ? 1.0f : 0.0f;
      }
      result.params.zero_grads();
      Trace trace;
      const Tensor out = run_layers(result.params, head, batch, &trace);
      const auto loss = ops::bce_loss(out, target);
      check_finite(loss.value, epoch, pos / opts.batch_size);
      backward_layers(result.params, head, trace, batch, loss.grad);
      opt.step(result.params);
      loss_sum += loss.value * static_cast<double>(n);
    }
    result.report.epoch_loss.push_back(loss_sum / static_cast<double>(frames.size()));
    if (opts.stop_after_epoch && opts.stop_after_epoch(result.params, result.report)) {
      result.report.stopped_early = true;
      break;
    }
  }
  result.report.wall_seconds = seconds_since(start);
  return result;
}

TrainResult train_classifier(const ParameterSet& encoder_src, const DatasetManifest& manifest,
                             const ModelConfig& config, const TrainOptions& opts) {
  auto [frames, labels] = load_event_frames(manifest);
  return train_classifier(encoder_src, frames, labels, config, opts);
}

double reconstruction_accuracy(const ParameterSet& ps, std::span<const EventFrame> frames) {
  if (frames.empty()) throw ValidationError("reconstruction_accuracy: no frames");
  const std::size_t size = ps.config.input_size;
  double total = 0.0;
  for (const auto& frame : frames) {
    const Tensor x = frame_to_tensor(frame, size);
    const Tensor y = reconstruct(ps, x);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const bool on = y.data[i] >= 0.5f;
      if (on == (x.data[i] != 0.0f)) ++agree;
    }
    total += static_cast<double>(agree) / static_cast<double>(x.numel());
  }
  return total / static_cast<double>(frames.size());
}

double reconstruction_accuracy(const ParameterSet& ps, const DatasetManifest& manifest) {
  auto [frames, labels] = load_event_frames(manifest);
  return reconstruction_accuracy(ps, frames);
}

std::vector<double> classify_scores(const ParameterSet& ps, std::span<const EventFrame> frames) {
  std::vector<double> scores;
  scores.reserve(frames.size());
  for (const auto& frame : frames) scores.push_back(predict(ps, frame));
  return scores;
}

}  // namespace evlab
