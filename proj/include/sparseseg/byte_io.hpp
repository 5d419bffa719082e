#pragma once

// Little-endian cursor helpers shared by the on-disk formats.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "sparseseg/error.hpp"

namespace sparseseg::io {

using Bytes = std::vector<std::byte>;
using ByteView = std::span<const std::byte>;

template <typename T>
T byteswap_value(T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::byte raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
  std::memcpy(&value, raw, sizeof(T));
  return value;
}

class Reader {
public:
  explicit Reader(ByteView bytes, bool big_endian = false)
      : bytes_(bytes), big_endian_(big_endian) {}

  template <typename T>
  T read() {
    require(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    const bool swap = big_endian_ != (std::endian::native == std::endian::big);
    return swap ? byteswap_value(value) : value;
  }

  template <typename T>
  T read_at(std::size_t offset) const {
    if (offset + sizeof(T) > bytes_.size())
      throw Error(ErrorCode::TruncatedData, "read past end of buffer");
    T value;
    std::memcpy(&value, bytes_.data() + offset, sizeof(T));
    const bool swap = big_endian_ != (std::endian::native == std::endian::big);
    return swap ? byteswap_value(value) : value;
  }

  void read_floats(float* out, std::size_t n) {
    require(n * sizeof(float));
    std::memcpy(out, bytes_.data() + pos_, n * sizeof(float));
    if (big_endian_ != (std::endian::native == std::endian::big))
      for (std::size_t i = 0; i < n; ++i) out[i] = byteswap_value(out[i]);
    pos_ += n * sizeof(float);
  }

  std::string read_string(std::size_t n) {
    require(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void require(std::size_t n) const {
    if (remaining() < n) throw Error(ErrorCode::TruncatedData, "unexpected end of data");
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void seek(std::size_t pos) { pos_ = pos; }

private:
  ByteView bytes_;
  std::size_t pos_ = 0;
  bool big_endian_;
};

class Writer {
public:
  template <typename T>
  void write(T value) {
    if constexpr (std::endian::native == std::endian::big) value = byteswap_value(value);
    const auto* p = reinterpret_cast<const std::byte*>(&value);
    out_.insert(out_.end(), p, p + sizeof(T));
  }

  void write_floats(const float* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto* p = reinterpret_cast<const std::byte*>(data);
      out_.insert(out_.end(), p, p + n * sizeof(float));
    } else {
      for (std::size_t i = 0; i < n; ++i) write(data[i]);
    }
  }

  void write_string(std::string_view s) {
    const auto* p = reinterpret_cast<const std::byte*>(s.data());
    out_.insert(out_.end(), p, p + s.size());
  }

  void reserve(std::size_t n) { out_.reserve(n); }
  Bytes take() { return std::move(out_); }

private:
  Bytes out_;
};

Bytes read_file(const std::string& path);
void write_file(const std::string& path, ByteView bytes);

inline void expect_magic(Reader& r, std::string_view magic) {
  if (r.remaining() < magic.size()) throw Error(ErrorCode::MalformedHeader, "missing magic");
  if (r.read_string(magic.size()) != magic)
    throw Error(ErrorCode::MalformedHeader, "bad magic, expected " + std::string(magic));
}

}  // namespace sparseseg::io
