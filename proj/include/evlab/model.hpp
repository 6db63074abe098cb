#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "evlab/events.hpp"
#include "evlab/tensor.hpp"

// Model construction and execution. The autoencoder is a three-block
// convolutional encoder (conv 3x3, relu, maxpool 2x2 per block) mirrored by a
// nearest-neighbor upsampling decoder with a sigmoid output head. The
// classifier reuses the encoder frozen and adds a two-layer fully connected
// head on the flattened latent.

namespace evlab {

enum class LossKind : std::uint8_t { Bce = 0, Mse = 1 };

const char* loss_name(LossKind k);
LossKind parse_loss(const std::string& name);

struct ModelConfig {
  std::uint32_t input_size = 64;
  std::vector<std::uint32_t> base_channels = {32, 64, 128};
  double width_mult = 1.0;
  std::uint32_t fc_hidden = 200;
  LossKind loss = LossKind::Bce;
  std::uint64_t seed = 1;

  /// Channel count of encoder block `i` after width scaling: at least 1,
  /// otherwise round-half-up of base * width_mult.
  std::size_t channels(std::size_t i) const;
  std::size_t fc_units() const;
  std::size_t latent_side() const { return input_size / 8; }
  std::size_t latent_numel() const { return channels(2) * latent_side() * latent_side(); }

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool frozen = false;
};

/// A model is its parameter tensors in canonical order plus the config that
/// shaped them. The classifier variant carries the (frozen) encoder tensors
/// followed by the head.
struct ParameterSet {
  ModelConfig config;
  std::vector<NamedTensor> tensors;

  NamedTensor* find(const std::string& name);
  const NamedTensor* find(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has_classifier_head() const;
  void zero_grads();
};

std::size_t param_count(const ParameterSet& ps, bool trainable_only = false);

// ---------------------------------------------------------------------------
// layer plans
// ---------------------------------------------------------------------------

enum class LayerOp : std::uint8_t { Conv, Relu, MaxPool, Upsample, Sigmoid, Flatten, Fc };

struct LayerDesc {
  LayerOp op;
  std::string param;  // tensor base name for Conv/Fc, empty otherwise
};

std::vector<LayerDesc> encoder_layers();
std::vector<LayerDesc> decoder_layers();
std::vector<LayerDesc> autoencoder_layers();
std::vector<LayerDesc> classifier_layers();
std::vector<LayerDesc> classifier_head_layers();

/// Activations recorded during a forward pass, one entry per layer, for the
/// backward pass and for probing.
struct Trace {
  std::vector<Tensor> acts;
  std::vector<std::vector<std::uint8_t>> pool_argmax;
};

Tensor run_layers(const ParameterSet& ps, std::span<const LayerDesc> layers,
                  const Tensor& input, Trace* trace = nullptr);

/// Accumulates parameter gradients into the .grad buffers of non-frozen
/// tensors. Walks from the output back and stops once every remaining layer
/// is below the first trainable parameter.
void backward_layers(ParameterSet& ps, std::span<const LayerDesc> layers, const Trace& trace,
                     const Tensor& input, const Tensor& grad_out);

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

ParameterSet build_autoencoder(const ModelConfig& config);

/// Builds a classifier around an existing encoder. Architecture fields of
/// `config` must match the source model's; encoder tensors are copied and
/// marked frozen, the head is freshly initialized from config.seed.
ParameterSet build_classifier(const ParameterSet& encoder_src, const ModelConfig& config);

// ---------------------------------------------------------------------------
// inference helpers
// ---------------------------------------------------------------------------

/// Event mask resized (nearest neighbor) to size x size, as a [1,1,S,S]
/// tensor of 0/1 floats.
Tensor frame_to_tensor(const EventFrame& frame, std::size_t size);
Tensor frames_to_tensor(std::span<const EventFrame> frames, std::size_t size);

Tensor reconstruct(const ParameterSet& ps, const Tensor& input);
Tensor reconstruct(const ParameterSet& ps, const EventFrame& frame);
Tensor encode(const ParameterSet& ps, const Tensor& input);
/// Single-frame latent, squeezed to [c3, S/8, S/8].
Tensor encode(const ParameterSet& ps, const EventFrame& frame);
Tensor decode_latent(const ParameterSet& ps, const Tensor& latent);
Tensor predict(const ParameterSet& ps, const Tensor& input);
double predict(const ParameterSet& ps, const EventFrame& frame);

// ---------------------------------------------------------------------------
// weight files
// ---------------------------------------------------------------------------

void save_weights(const ParameterSet& ps, const std::filesystem::path& path);
Bytes encode_weights(const ParameterSet& ps);
ParameterSet load_weights(const std::filesystem::path& path);
ParameterSet decode_weights(const Bytes& bytes);

/// Throws naming the first mismatching architecture field when `have` cannot
/// serve where `want` is expected.
void check_arch_match(const ModelConfig& have, const ModelConfig& want);

}  // namespace evlab
