#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vmbo/errors.hpp"

namespace vmbo::io {

// Whole file as bytes; throws a format error naming the path if unreadable.
std::vector<unsigned char> read_bytes(const std::filesystem::path& path);

std::ofstream open_output(const std::filesystem::path& path);

template <typename T>
T load_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  }
  return v;
}

template <typename T>
void store_le(std::ostream& os, T v) {
  auto* b = reinterpret_cast<unsigned char*>(&v);
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  }
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

inline std::uint32_t load_be32(const unsigned char* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

// Bounds-checked sequential reader over a byte buffer.
class ByteReader {
 public:
  ByteReader(const std::vector<unsigned char>& bytes, std::string name) : bytes_(bytes), name_(std::move(name)) {}

  void need(std::size_t n) const {
    if (offset_ + n > bytes_.size())
      fail(ErrorKind::format, name_ + ": truncated at byte offset " + std::to_string(offset_) + " (need " +
                                  std::to_string(n) + " more bytes, file has " + std::to_string(bytes_.size()) + ")");
  }
  const unsigned char* take(std::size_t n) {
    need(n);
    const unsigned char* p = bytes_.data() + offset_;
    offset_ += n;
    return p;
  }
  template <typename T>
  T le() {
    return load_le<T>(take(sizeof(T)));
  }
  std::uint32_t be32() { return load_be32(take(4)); }
  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return bytes_.size() - offset_; }
  const std::string& name() const { return name_; }

 private:
  const std::vector<unsigned char>& bytes_;
  std::string name_;
  std::size_t offset_ = 0;
};

}  // namespace vmbo::io
