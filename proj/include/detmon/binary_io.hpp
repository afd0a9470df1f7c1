#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>

#include "detmon/error.hpp"

// Little-endian encoding helpers shared by the stream and model file formats.
namespace detmon::io {

template <typename T>
  requires std::is_trivially_copyable_v<T>
std::array<char, sizeof(T)> to_le_bytes(T value) {
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  return bytes;
}

template <typename T>
  requires std::is_trivially_copyable_v<T>
T from_le_bytes(const char* data) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), data, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  return std::bit_cast<T>(bytes);
}

template <typename T>
void write_le(std::ostream& out, T value) {
  const auto bytes = to_le_bytes(value);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline void write_f32_blob(std::ostream& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (float v : values) write_le(out, v);
  }
}

// Reads from an istream while tracking the absolute byte offset, so that
// short reads can be reported at the exact position the data ran out.
class CountingReader {
 public:
  explicit CountingReader(std::istream& in, std::uint64_t start_offset = 0)
      : in_(&in), offset_(start_offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

  // Returns the number of bytes actually read.
  std::size_t read_some(char* dst, std::size_t n) {
    in_->read(dst, static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_->gcount());
    offset_ += got;
    return got;
  }

  void read_exact(char* dst, std::size_t n, const char* what) {
    if (read_some(dst, n) != n) throw TruncationError(std::string("unexpected end of data reading ") + what, offset_);
  }

  template <typename T>
  T read(const char* what) {
    std::array<char, sizeof(T)> bytes;
    read_exact(bytes.data(), bytes.size(), what);
    return from_le_bytes<T>(bytes.data());
  }

  // True when no further byte is available; does not consume anything.
  bool at_eof() {
    return in_->peek() == std::char_traits<char>::eof();
  }

 private:
  std::istream* in_;
  std::uint64_t offset_;
};

inline void read_f32_blob(CountingReader& reader, std::span<float> dst, const char* what) {
  reader.read_exact(reinterpret_cast<char*>(dst.data()), dst.size_bytes(), what);
  if constexpr (std::endian::native == std::endian::big) {
    for (float& v : dst) v = from_le_bytes<float>(reinterpret_cast<const char*>(&v));
  }
}

}  // namespace detmon::io
