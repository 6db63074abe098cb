#include "evlab/common.hpp"

#include <unistd.h>

#include <atomic>
#include <cstring>
#include <fstream>

namespace evlab {

namespace fs = std::filesystem;

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  Bytes buf(size);
  if (size > 0) in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
  if (!in) throw Error("short read: " + path.string());
  return buf;
}

void write_file_atomic(const fs::path& path, const void* data, std::size_t size) {
  fs::path dir = path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  // Unique-ish temp name next to the target so the rename stays on one filesystem.
  static std::atomic<unsigned> counter{0};
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(counter.fetch_add(1)) + "." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot create file: " + tmp.string());
    if (size > 0) out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(size));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("short write: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("rename failed for " + path.string() + ": " + ec.message());
  }
}

void write_file_atomic(const fs::path& path, const Bytes& bytes) {
  write_file_atomic(path, bytes.data(), bytes.size());
}

void write_file_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, text.data(), text.size());
}

void ByteReader::require(std::size_t n, const char* what) const {
  if (buf_.size() - pos_ < n) {
    throw DecodeError(std::string("truncated while reading ") + what + " at byte " +
                      std::to_string(pos_));
  }
}

std::uint8_t ByteReader::u8(const char* what) {
  require(1, what);
  return buf_[pos_++];
}

std::uint16_t ByteReader::u16le(const char* what) {
  require(2, what);
  std::uint16_t v = static_cast<std::uint16_t>(buf_[pos_]) |
                    static_cast<std::uint16_t>(buf_[pos_ + 1]) << 8;
  pos_ += 2;
  return v;
}

std::uint32_t ByteReader::u32le(const char* what) {
  require(4, what);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | buf_[pos_ + static_cast<std::size_t>(i)];
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64le(const char* what) {
  require(8, what);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf_[pos_ + static_cast<std::size_t>(i)];
  pos_ += 8;
  return v;
}

float ByteReader::f32le(const char* what) {
  std::uint32_t raw = u32le(what);
  float v;
  std::memcpy(&v, &raw, sizeof v);
  return v;
}

double ByteReader::f64le(const char* what) {
  std::uint64_t raw = u64le(what);
  double v;
  std::memcpy(&v, &raw, sizeof v);
  return v;
}

void ByteReader::bytes(void* out, std::size_t n, const char* what) {
  require(n, what);
  std::memcpy(out, buf_.data() + pos_, n);
  pos_ += n;
}

void ByteReader::skip(std::size_t n, const char* what) {
  require(n, what);
  pos_ += n;
}

void ByteWriter::u16le(std::uint16_t v) {
  out_.push_back(static_cast<std::uint8_t>(v & 0xff));
  out_.push_back(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32le(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void ByteWriter::u64le(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void ByteWriter::f32le(float v) {
  std::uint32_t raw;
  std::memcpy(&raw, &v, sizeof raw);
  u32le(raw);
}

void ByteWriter::f64le(double v) {
  std::uint64_t raw;
  std::memcpy(&raw, &v, sizeof raw);
  u64le(raw);
}

void ByteWriter::bytes(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  out_.insert(out_.end(), p, p + n);
}

}  // namespace evlab
