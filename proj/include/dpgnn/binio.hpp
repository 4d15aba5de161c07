#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "dpgnn/error.hpp"

namespace dpgnn::binio {

// Little-endian append/read helpers over an in-memory byte buffer.

inline void put_bytes(std::vector<std::uint8_t>& out, const void* p, std::size_t n) {
  if (n == 0) return;
  const std::size_t at = out.size();
  out.resize(at + n);
  std::memcpy(out.data() + at, p, n);
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  auto bits = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bits.begin(), bits.end());
  }
  out.insert(out.end(), bits.begin(), bits.end());
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& data, std::string what)
      : data_(data), what_(std::move(what)) {}

  template <typename T>
  T get() {
    std::array<std::uint8_t, sizeof(T)> bits{};
    take(bits.data(), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(bits.begin(), bits.end());
    }
    return std::bit_cast<T>(bits);
  }

  void take(void* dst, std::size_t n) {
    if (remaining() < n) throw InputError(what_ + ": truncated payload");
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& data_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace dpgnn::binio
