#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace evlab {

/// Base class for every data/validation failure raised by the library.
/// The CLI maps these to exit code 2; anything else is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed bytes while parsing a file format (PGM, EVF, weights, manifest).
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// A precondition or invariant violated by caller-supplied data.
class ValidationError : public Error {
 public:
  using Error::Error;
};

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file followed by a rename, so readers never see
/// a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, const void* data,
                       std::size_t size);
void write_file_atomic(const std::filesystem::path& path, const Bytes& bytes);
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& text);

/// Little-endian cursor over a byte buffer. Throws DecodeError naming the
/// byte offset when the buffer runs short.
class ByteReader {
 public:
  explicit ByteReader(const Bytes& buf) : buf_(buf) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }
  bool at_end() const { return pos_ == buf_.size(); }

  std::uint8_t u8(const char* what);
  std::uint16_t u16le(const char* what);
  std::uint32_t u32le(const char* what);
  std::uint64_t u64le(const char* what);
  float f32le(const char* what);
  double f64le(const char* what);
  void bytes(void* out, std::size_t n, const char* what);
  void skip(std::size_t n, const char* what);

 private:
  void require(std::size_t n, const char* what) const;
  const Bytes& buf_;
  std::size_t pos_ = 0;
};

/// Little-endian serializer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16le(std::uint16_t v);
  void u32le(std::uint32_t v);
  void u64le(std::uint64_t v);
  void f32le(float v);
  void f64le(double v);
  void bytes(const void* data, std::size_t n);

  const Bytes& data() const { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

}  // namespace evlab
