#include "evlab/image.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace evlab {

namespace {

bool is_pgm_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Skips whitespace and '#' comment lines; pos is left on the first token byte.
void skip_separators(const Bytes& b, std::size_t& pos) {
  while (pos < b.size()) {
    if (is_pgm_space(b[pos])) {
      ++pos;
    } else if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else {
      return;
    }
  }
}

std::uint32_t read_header_int(const Bytes& b, std::size_t& pos, const char* what) {
  skip_separators(b, pos);
  if (pos >= b.size() || b[pos] < '0' || b[pos] > '9') {
    throw DecodeError(std::string("pgm: expected ") + what + " at byte " +
                      std::to_string(pos));
  }
  std::uint64_t v = 0;
  while (pos < b.size() && b[pos] >= '0' && b[pos] <= '9') {
    v = v * 10 + (b[pos] - '0');
    if (v > 0xffffffffull) {
      throw DecodeError(std::string("pgm: ") + what + " overflows at byte " +
                        std::to_string(pos));
    }
    ++pos;
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

GrayFrame load_pgm(const Bytes& bytes) {
  std::size_t pos = 0;
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw DecodeError("pgm: missing P5 magic at byte 0");
  }
  pos = 2;
  const std::uint32_t width = read_header_int(bytes, pos, "width");
  const std::uint32_t height = read_header_int(bytes, pos, "height");
  if (width == 0 || height == 0) {
    throw DecodeError("pgm: zero dimension at byte " + std::to_string(pos));
  }
  const std::size_t maxval_at = pos;
  const std::uint32_t maxval = read_header_int(bytes, pos, "maxval");
  if (maxval != 255) {
    throw DecodeError("pgm: maxval must be 255, got " + std::to_string(maxval) +
                      " at byte " + std::to_string(maxval_at));
  }
  if (pos >= bytes.size() || !is_pgm_space(bytes[pos])) {
    throw DecodeError("pgm: expected whitespace before payload at byte " +
                      std::to_string(pos));
  }
  ++pos;  // exactly one separator byte before the raster
  const std::size_t need = static_cast<std::size_t>(width) * height;
  if (bytes.size() - pos < need) {
    throw DecodeError("pgm: truncated payload at byte " + std::to_string(bytes.size()) +
                      " (need " + std::to_string(pos + need) + " bytes)");
  }
  GrayFrame frame;
  frame.width = width;
  frame.height = height;
  frame.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return frame;
}

GrayFrame load_pgm_file(const std::filesystem::path& path) {
  try {
    return load_pgm(read_file(path));
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

Bytes encode_pgm(const GrayFrame& frame) {
  if (frame.width == 0 || frame.height == 0) {
    throw ValidationError("pgm: cannot encode zero-sized frame");
  }
  if (frame.pixels.size() != static_cast<std::size_t>(frame.width) * frame.height) {
    throw ValidationError("pgm: pixel count does not match dimensions");
  }
  std::string header = "P5\n" + std::to_string(frame.width) + " " +
                       std::to_string(frame.height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), frame.pixels.begin(), frame.pixels.end());
  return out;
}

void save_pgm(const GrayFrame& frame, const std::filesystem::path& path) {
  write_file_atomic(path, encode_pgm(frame));
}

GrayFrame to_grayscale(std::uint32_t width, std::uint32_t height,
                       std::span<const std::uint8_t> r,
                       std::span<const std::uint8_t> g,
                       std::span<const std::uint8_t> b) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (r.size() != n || g.size() != n || b.size() != n) {
    throw ValidationError("to_grayscale: channel raster sizes do not match dimensions");
  }
  GrayFrame frame;
  frame.width = width;
  frame.height = height;
  frame.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    double rounded = std::floor(y + 0.5);
    if (rounded < 0.0) rounded = 0.0;
    if (rounded > 255.0) rounded = 255.0;
    frame.pixels[i] = static_cast<std::uint8_t>(rounded);
  }
  return frame;
}

}  // namespace evlab
