#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "evlab/common.hpp"

namespace evlab {

/// 8-bit luminance raster, row-major.
struct GrayFrame {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;  // width * height values

  std::size_t size() const { return pixels.size(); }
  bool operator==(const GrayFrame&) const = default;
};

/// Parses a binary PGM ("P5", maxval 255). Pixel values are copied verbatim.
/// Header comments (#...) and arbitrary whitespace are accepted as usual.
/// Errors name the byte offset of the problem.
GrayFrame load_pgm(const Bytes& bytes);
GrayFrame load_pgm_file(const std::filesystem::path& path);

Bytes encode_pgm(const GrayFrame& frame);
void save_pgm(const GrayFrame& frame, const std::filesystem::path& path);

/// BT.601 luminance: round(0.299 r + 0.587 g + 0.114 b), round half up,
/// clamped to [0, 255]. All three rasters must be width*height long.
GrayFrame to_grayscale(std::uint32_t width, std::uint32_t height,
                       std::span<const std::uint8_t> r,
                       std::span<const std::uint8_t> g,
                       std::span<const std::uint8_t> b);

}  // namespace evlab
