#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "lddr/error.hpp"

namespace lddr::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

class ByteWriter {
 public:
  void raw(std::string_view bytes) { buf_.append(bytes); }
  void u8(std::uint8_t v) { put(v); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f64(double v) { put(v); }
  void f64s(const double* v, std::size_t n) {
    buf_.append(reinterpret_cast<const char*>(v), n * sizeof(double));
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
  }

  const std::string& bytes() const noexcept { return buf_; }

 private:
  template <class T>
  void put(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    buf_.append(b, sizeof(T));
  }
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string context)
      : bytes_(bytes), context_(std::move(context)) {}

  std::string_view raw(std::size_t n) {
    need(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint8_t u8() { return get<std::uint8_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() { return get<double>(); }
  void f64s(double* out, std::size_t n) {
    if (n > remaining() / sizeof(double)) truncated(n * sizeof(double));
    std::memcpy(out, bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }
  std::string str(std::size_t max_len = 4096) {
    const auto n = u32();
    if (n > max_len) {
      throw ParseError(ParseErrorKind::malformed_header,
                       context_ + ": implausible string length " + std::to_string(n));
    }
    return std::string(raw(n));
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  void expect_end() const {
    if (remaining() != 0) {
      throw ParseError(ParseErrorKind::trailing_data,
                       context_ + ": " + std::to_string(remaining()) + " unexpected trailing bytes");
    }
  }

  /// Throws a truncation error unless `n` more bytes are available.
  void need(std::size_t n) {
    if (n > remaining()) truncated(n);
  }

 private:
  [[noreturn]] void truncated(std::size_t n) const {
    throw ParseError(ParseErrorKind::truncated, context_ + ": needed " + std::to_string(n) +
                                                    " bytes at offset " + std::to_string(pos_) +
                                                    ", " + std::to_string(remaining()) + " left");
  }
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view bytes_;
  std::string context_;
  std::size_t pos_ = 0;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace lddr::detail
