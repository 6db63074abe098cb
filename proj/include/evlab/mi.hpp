#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evlab/events.hpp"
#include "evlab/model.hpp"
#include "evlab/tensor.hpp"

// Layer-wise mutual information probe. Activations are discretized with a
// histogram quantizer, MI comes from the plug-in estimator over empirical
// joint counts. In coarsening mode each layer's code is a deterministic
// function of the previous layer's code, so the reported sequence obeys the
// discrete data-processing inequality by construction; raw mode quantizes
// every layer independently and is diagnostic only.

namespace evlab {

using Codes = std::vector<std::uint32_t>;

/// Discrete code per sample (dim 0 of the batch). Each feature dimension is
/// binned uniformly over its batch min/max, and the binned vector is mapped
/// to a dense code in first-appearance order.
Codes quantize(const Tensor& batch, std::size_t bins);

/// Empirical entropy of the code distribution, in bits.
double entropy_bits(const Codes& codes);

/// Plug-in mutual information in bits. mi_plugin(x, x) reproduces
/// entropy_bits(x) exactly, including rounding.
double mi_plugin(const Codes& x, const Codes& t);

/// Re-labels codes into first-appearance dense form, so two lists inducing
/// the same partition become identical.
Codes canonicalize_codes(const Codes& codes);

/// Replaces each sample's code with the raw code of the first sample sharing
/// its prev code, then canonicalizes. The result is a deterministic function
/// of `prev`, which is what chains the data-processing inequality.
Codes coarsen_codes(const Codes& raw, const Codes& prev);

enum class MiMode : std::uint8_t { Coarsening, Raw };

const char* mi_mode_name(MiMode mode);
MiMode parse_mi_mode(const std::string& name);

struct MiReport {
  std::vector<std::string> layers;
  std::vector<double> mi_bits;
  std::size_t bins = 0;
  std::size_t samples = 0;
  MiMode mode = MiMode::Coarsening;
};

/// Runs the sample frames through the model and reports I(input; layer) for
/// each encoder block and I(output; layer) for each decoder block (encoder
/// only when the model is a classifier). Needs at least 2 frames.
MiReport dpi_chain(const ParameterSet& model, std::span<const EventFrame> frames,
                   std::size_t bins, MiMode mode);

/// "# mode=..." tag line, then "layer,mi_bits" rows.
std::string mi_report_csv(const MiReport& report);

}  // namespace evlab
