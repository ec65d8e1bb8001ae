#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>

namespace cleanup {

/// 64-bit FNV-1a. Values are hashed by their little-endian byte image.
class Fnv1a {
 public:
  void add_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }

  template <typename T>
    requires std::is_arithmetic_v<T> || std::is_enum_v<T>
  void add(T v) {
    add_bytes(&v, sizeof(v));
  }

  void add(std::string_view s) {
    add(static_cast<std::uint64_t>(s.size()));
    add_bytes(s.data(), s.size());
  }

  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

static_assert(std::endian::native == std::endian::little, "digests assume little-endian hosts");

std::string to_hex(std::uint64_t v);
std::uint64_t from_hex(std::string_view s);

}  // namespace cleanup
