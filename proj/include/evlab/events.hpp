#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "evlab/common.hpp"
#include "evlab/image.hpp"

namespace evlab {

enum class EventMode : std::uint8_t { Successive = 0, Reference = 1 };

/// Binary per-pixel event mask. An event fires where the absolute intensity
/// difference between two frames is >= threshold (inclusive, so the threshold
/// is the minimum detectable change). Events carry no polarity.
struct EventFrame {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> mask;  // width*height values, each 0 or 1
  int threshold = 1;               // Th in [1, 255], as used at synthesis time
  EventMode mode = EventMode::Successive;
  /// Frame ordinal within its source sequence. Bookkeeping only: the EVF
  /// format does not carry it and equality ignores it.
  std::uint32_t source_index = 0;

  std::size_t size() const { return mask.size(); }

  bool operator==(const EventFrame& o) const {
    return width == o.width && height == o.height && threshold == o.threshold &&
           mode == o.mode && mask == o.mask;
  }
};

/// Events between successive frames: mask[i] = |curr[i] - prev[i]| >= th.
EventFrame diff_events(const GrayFrame& prev, const GrayFrame& curr, int th);

/// Events against a fixed reference frame; same rule, mode = Reference.
EventFrame ref_events(const GrayFrame& reference, const GrayFrame& curr, int th);

/// EVF file format, little-endian:
///   magic "EVF1" | u16 width | u16 height | u8 threshold | u8 mode |
///   mask rows bit-packed MSB-first, each row padded to a byte boundary,
///   rows concatenated top to bottom. Padding bits must be zero.
Bytes encode_evf(const EventFrame& frame);
EventFrame decode_evf(const Bytes& bytes);
EventFrame load_evf_file(const std::filesystem::path& path);
void save_evf(const EventFrame& frame, const std::filesystem::path& path);

/// Fraction of pixels that fired, in [0, 1].
double event_density(const EventFrame& frame);

}  // namespace evlab
