#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace flowcast {

// 64-bit FNV-1a.
class Fnv1a {
 public:
  void bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  template <class T>
  void value(const T& v) { bytes(&v, sizeof(T)); }
  void doubles(std::span<const double> v) { bytes(v.data(), v.size_bytes()); }
  void text(std::string_view s) {
    value(static_cast<std::uint64_t>(s.size()));
    bytes(s.data(), s.size());
  }

  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace flowcast
