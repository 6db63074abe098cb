#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "evlab/events.hpp"
#include "evlab/image.hpp"
#include "evlab/rng.hpp"

namespace helpers {

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    auto base = std::filesystem::temp_directory_path() / "evlab-test-XXXXXX";
    std::string tmpl = base.string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path = tmpl;
  }
  ~TempDir() {
    if (path.empty()) return;
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  TempDir(TempDir&& other) noexcept : path(std::move(other.path)) { other.path.clear(); }
  TempDir& operator=(TempDir&& other) noexcept {
    std::swap(path, other.path);
    return *this;
  }

  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline evlab::GrayFrame random_gray(evlab::Rng& rng, std::uint32_t w, std::uint32_t h) {
  evlab::GrayFrame f{w, h, {}};
  f.pixels.resize(static_cast<std::size_t>(w) * h);
  for (auto& p : f.pixels) p = static_cast<std::uint8_t>(rng.next_below(256));
  return f;
}

inline evlab::EventFrame random_event_frame(evlab::Rng& rng, std::uint32_t w, std::uint32_t h,
                                            int th = 8) {
  evlab::EventFrame f;
  f.width = w;
  f.height = h;
  f.threshold = th;
  f.mode = evlab::EventMode::Successive;
  f.mask.resize(static_cast<std::size_t>(w) * h);
  for (auto& m : f.mask) m = static_cast<std::uint8_t>(rng.next_below(2));
  return f;
}

}  // namespace helpers
