#pragma once

// Little-endian byte buffers shared by the CLEM / CLLP / CLVE formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "lens/errors.hpp"

namespace lens::binio {

template <class U>
U to_le(U v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    U out{};
    auto* src = reinterpret_cast<const unsigned char*>(&v);
    auto* dst = reinterpret_cast<unsigned char*>(&out);
    for (std::size_t i = 0; i < sizeof(U); ++i) dst[i] = src[sizeof(U) - 1 - i];
    return out;
  }
}

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  void f32s(std::span<const float> vs) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(vs.data(), vs.size_bytes());
    } else {
      for (float v : vs) f32(v);
    }
  }
  const std::vector<unsigned char>& buffer() const noexcept { return buf_; }
  std::vector<unsigned char> release() noexcept { return std::move(buf_); }

 private:
  template <class U>
  void put(U v) {
    v = to_le(v);
    bytes(&v, sizeof v);
  }
  std::vector<unsigned char> buf_;
};

/// Bounds-checked reader; every short read raises a truncation ParseError.
class Reader {
 public:
  Reader(std::span<const unsigned char> data, std::string file)
      : data_(data), file_(std::move(file)) {}

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }
  const std::string& file() const noexcept { return file_; }

  void set_record(std::int64_t record) noexcept { record_ = record; }

  void bytes(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  void f32s(std::span<float> out) {
    need(out.size_bytes());
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
      pos_ += out.size_bytes();
    } else {
      for (float& v : out) v = f32();
    }
  }

  void need(std::size_t n) const {
    if (remaining() < n) {
      throw ParseError(ParseErrorKind::kTruncated, file_, record_,
                       "needed " + std::to_string(n) + " bytes, " + std::to_string(remaining()) +
                           " remain");
    }
  }

  [[noreturn]] void fail(ParseErrorKind kind, const std::string& detail) const {
    throw ParseError(kind, file_, record_, detail);
  }

 private:
  template <class U>
  U get() {
    U v;
    bytes(&v, sizeof v);
    return to_le(v);
  }
  std::span<const unsigned char> data_;
  std::string file_;
  std::size_t pos_ = 0;
  std::int64_t record_ = -1;
};

std::vector<unsigned char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes);

}  // namespace lens::binio
