#include "evlab/mi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace evlab {

Codes quantize(const Tensor& batch, std::size_t bins) {
  if (batch.rank() < 2) throw ValidationError("quantize: batch must have a sample dimension");
  if (bins == 0) throw ValidationError("quantize: bins must be positive");
  const std::size_t n = batch.dim(0);
  if (n == 0) throw ValidationError("quantize: empty batch");
  const std::size_t feat = batch.numel() / n;

  std::vector<float> lo(feat), hi(feat);
  for (std::size_t f = 0; f < feat; ++f) {
    lo[f] = hi[f] = batch.data[f];
  }
  for (std::size_t s = 1; s < n; ++s) {
    const float* row = batch.data.data() + s * feat;
    for (std::size_t f = 0; f < feat; ++f) {
      lo[f] = std::min(lo[f], row[f]);
      hi[f] = std::max(hi[f], row[f]);
    }
  }

  std::vector<std::uint16_t> binned(feat);
  std::map<std::vector<std::uint16_t>, std::uint32_t> dict;
  Codes codes(n);
  for (std::size_t s = 0; s < n; ++s) {
    const float* row = batch.data.data() + s * feat;
    for (std::size_t f = 0; f < feat; ++f) {
      const float width = hi[f] - lo[f];
      std::size_t b = 0;
      if (width > 0.0f) {
        b = static_cast<std::size_t>(
            static_cast<double>(row[f] - lo[f]) / static_cast<double>(width) *
            static_cast<double>(bins));
        if (b >= bins) b = bins - 1;
      }
      binned[f] = static_cast<std::uint16_t>(b);
    }
    const auto [it, inserted] = dict.emplace(binned, static_cast<std::uint32_t>(dict.size()));
    codes[s] = it->second;
  }
  return codes;
}

double entropy_bits(const Codes& codes) {
  if (codes.empty()) throw ValidationError("entropy_bits: empty input");
  std::map<std::uint32_t, std::size_t> counts;
  for (auto c : codes) ++counts[c];
  const double n = static_cast<double>(codes.size());
  double h = 0.0;
  for (const auto& [code, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h += p * std::log2(n / static_cast<double>(c));
  }
  return h;
}

double mi_plugin(const Codes& x, const Codes& t) {
  if (x.empty() || t.empty()) throw ValidationError("mi_plugin: empty input");
  if (x.size() != t.size())
    throw ValidationError("mi_plugin: code lists differ in length");
  std::map<std::uint32_t, std::size_t> cx, ct;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> cxt;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ++cx[x[i]];
    ++ct[t[i]];
    ++cxt[{x[i], t[i]}];
  }
  const double n = static_cast<double>(x.size());
  double mi = 0.0;
  for (const auto& [key, joint] : cxt) {
    const double p = static_cast<double>(joint) / n;
    const double ratio = static_cast<double>(joint) * n /
                         (static_cast<double>(cx[key.first]) * static_cast<double>(ct[key.second]));
    mi += p * std::log2(ratio);
  }
  return mi < 0.0 ? 0.0 : mi;
}

const char* mi_mode_name(MiMode mode) {
  return mode == MiMode::Coarsening ? "coarsening" : "raw";
}

MiMode parse_mi_mode(const std::string& name) {
  if (name == "coarsening") return MiMode::Coarsening;
  if (name == "raw") return MiMode::Raw;
  throw ValidationError("unknown probe mode '" + name + "', expected coarsening or raw");
}

/// Re-labels codes into first-appearance dense form so that two code lists
/// inducing the same partition become identical.
Codes canonicalize_codes(const Codes& codes) {
  std::map<std::uint32_t, std::uint32_t> remap;
  Codes out(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const auto [it, inserted] = remap.emplace(codes[i], static_cast<std::uint32_t>(remap.size()));
    out[i] = it->second;
  }
  return out;
}

/// Replaces each sample's code with the raw code of the first sample sharing
/// its previous-chain code. The result is a deterministic function of `prev`,
/// which is what makes the chain obey the discrete DPI.
Codes coarsen_codes(const Codes& raw, const Codes& prev) {
  std::map<std::uint32_t, std::uint32_t> rep;
  Codes out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto [it, inserted] = rep.emplace(prev[i], raw[i]);
    out[i] = it->second;
  }
  return canonicalize_codes(out);
}

MiReport dpi_chain(const ParameterSet& model, std::span<const EventFrame> frames,
                   std::size_t bins, MiMode mode) {
  if (frames.size() < 2) throw ValidationError("dpi_chain: need at least 2 sample frames");
  const bool has_decoder = model.find("dec.conv1.w") != nullptr;

  const Tensor input = frames_to_tensor(frames, model.config.input_size);
  const auto layers = has_decoder ? autoencoder_layers() : encoder_layers();
  Trace trace;
  run_layers(model, layers, input, &trace);

  // One tap per block: the pooled encoder outputs, then the upsampled decoder
  // outputs and the sigmoid head.
  struct Tap {
    std::size_t layer;
    std::string name;
    bool decoder;
  };
  std::vector<Tap> taps;
  for (int b = 0; b < 3; ++b)
    taps.push_back({static_cast<std::size_t>(3 * b + 2), "enc.conv" + std::to_string(b + 1), false});
  if (has_decoder) {
    for (int b = 0; b < 3; ++b)
      taps.push_back(
          {static_cast<std::size_t>(9 + 3 * b + 2), "dec.conv" + std::to_string(b + 1), true});
    taps.push_back({layers.size() - 1, "dec.conv4", true});
  }

  const Codes x_codes = canonicalize_codes(quantize(input, bins));
  Codes xprime_codes;
  if (has_decoder) xprime_codes = canonicalize_codes(quantize(trace.acts.back(), bins));

  MiReport report;
  report.bins = bins;
  report.samples = frames.size();
  report.mode = mode;
  Codes chain = x_codes;
  for (const auto& tap : taps) {
    Codes codes = canonicalize_codes(quantize(trace.acts[tap.layer], bins));
    if (mode == MiMode::Coarsening) {
      codes = coarsen_codes(codes, chain);
      chain = codes;
    }
    report.layers.push_back(tap.name);
    report.mi_bits.push_back(mi_plugin(tap.decoder ? xprime_codes : x_codes, codes));
  }
  return report;
}

std::string mi_report_csv(const MiReport& report) {
  std::string out = "# mode=";
  out += mi_mode_name(report.mode);
  out += " bins=" + std::to_string(report.bins) + " samples=" + std::to_string(report.samples);
  out += "\nlayer,mi_bits\n";
  char buf[64];
  for (std::size_t i = 0; i < report.layers.size(); ++i) {
    std::snprintf(buf, sizeof buf, ",%.17g\n", report.mi_bits[i]);
    out += report.layers[i];
    out += buf;
  }
  return out;
}

}  // namespace evlab
