#include "evlab/events.hpp"

#include <cstdlib>
#include <string>

namespace evlab {

namespace {

void check_threshold(int th) {
  if (th < 1 || th > 255) {
    throw ValidationError("threshold must be in [1, 255], got " + std::to_string(th));
  }
}

EventFrame threshold_diff(const GrayFrame& a, const GrayFrame& b, int th,
                          EventMode mode) {
  check_threshold(th);
  if (a.width != b.width || a.height != b.height) {
    throw ValidationError("event synthesis: frame dimensions differ (" +
                          std::to_string(a.width) + "x" + std::to_string(a.height) +
                          " vs " + std::to_string(b.width) + "x" +
                          std::to_string(b.height) + ")");
  }
  EventFrame ev;
  ev.width = a.width;
  ev.height = a.height;
  ev.threshold = th;
  ev.mode = mode;
  ev.mask.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int diff = std::abs(static_cast<int>(b.pixels[i]) - static_cast<int>(a.pixels[i]));
    ev.mask[i] = diff >= th ? 1 : 0;
  }
  return ev;
}

}  // namespace

EventFrame diff_events(const GrayFrame& prev, const GrayFrame& curr, int th) {
  return threshold_diff(prev, curr, th, EventMode::Successive);
}

EventFrame ref_events(const GrayFrame& reference, const GrayFrame& curr, int th) {
  return threshold_diff(reference, curr, th, EventMode::Reference);
}

Bytes encode_evf(const EventFrame& frame) {
  if (frame.width == 0 || frame.height == 0) {
    throw ValidationError("evf: cannot encode zero-sized frame");
  }
  if (frame.width > 0xffff || frame.height > 0xffff) {
    throw ValidationError("evf: dimensions exceed 65535");
  }
  if (frame.mask.size() != static_cast<std::size_t>(frame.width) * frame.height) {
    throw ValidationError("evf: mask length does not match dimensions");
  }
  check_threshold(frame.threshold);

  ByteWriter w;
  w.bytes("EVF1", 4);
  w.u16le(static_cast<std::uint16_t>(frame.width));
  w.u16le(static_cast<std::uint16_t>(frame.height));
  w.u8(static_cast<std::uint8_t>(frame.threshold));
  w.u8(static_cast<std::uint8_t>(frame.mode));

  const std::size_t row_bytes = (frame.width + 7) / 8;
  for (std::uint32_t y = 0; y < frame.height; ++y) {
    const std::uint8_t* row = frame.mask.data() + static_cast<std::size_t>(y) * frame.width;
    for (std::size_t rb = 0; rb < row_bytes; ++rb) {
      std::uint8_t packed = 0;
      for (int bit = 0; bit < 8; ++bit) {
        const std::size_t x = rb * 8 + static_cast<std::size_t>(bit);
        if (x >= frame.width) break;
        if (row[x] > 1) throw ValidationError("evf: mask value not in {0,1}");
        packed = static_cast<std::uint8_t>(packed | (row[x] << (7 - bit)));
      }
      w.u8(packed);
    }
  }
  return w.take();
}

EventFrame decode_evf(const Bytes& bytes) {
  ByteReader r(bytes);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::string(magic, 4) != "EVF1") {
    throw DecodeError("evf: bad magic at byte 0");
  }
  EventFrame frame;
  frame.width = r.u16le("width");
  frame.height = r.u16le("height");
  if (frame.width == 0 || frame.height == 0) {
    throw DecodeError("evf: zero dimension in header");
  }
  frame.threshold = r.u8("threshold");
  if (frame.threshold < 1) throw DecodeError("evf: threshold must be >= 1");
  const std::uint8_t mode = r.u8("mode");
  if (mode > 1) throw DecodeError("evf: unknown mode " + std::to_string(mode));
  frame.mode = static_cast<EventMode>(mode);

  frame.mask.resize(static_cast<std::size_t>(frame.width) * frame.height);
  const std::size_t row_bytes = (frame.width + 7) / 8;
  for (std::uint32_t y = 0; y < frame.height; ++y) {
    std::uint8_t* row = frame.mask.data() + static_cast<std::size_t>(y) * frame.width;
    for (std::size_t rb = 0; rb < row_bytes; ++rb) {
      const std::size_t at = r.pos();
      const std::uint8_t packed = r.u8("mask row");
      for (int bit = 0; bit < 8; ++bit) {
        const std::size_t x = rb * 8 + static_cast<std::size_t>(bit);
        const std::uint8_t v = (packed >> (7 - bit)) & 1;
        if (x < frame.width) {
          row[x] = v;
        } else if (v) {
          throw DecodeError("evf: nonzero padding bit at byte " + std::to_string(at));
        }
      }
    }
  }
  if (!r.at_end()) {
    throw DecodeError("evf: trailing bytes at byte " + std::to_string(r.pos()));
  }
  return frame;
}

EventFrame load_evf_file(const std::filesystem::path& path) {
  try {
    return decode_evf(read_file(path));
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

void save_evf(const EventFrame& frame, const std::filesystem::path& path) {
  write_file_atomic(path, encode_evf(frame));
}

double event_density(const EventFrame& frame) {
  if (frame.mask.empty()) return 0.0;
  std::size_t ones = 0;
  for (std::uint8_t v : frame.mask) ones += v;
  return static_cast<double>(ones) / static_cast<double>(frame.mask.size());
}

}  // namespace evlab
