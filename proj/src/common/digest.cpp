#include "cleanup/common/digest.hpp"

#include <charconv>

#include "cleanup/common/errors.hpp"

namespace cleanup {

std::string to_hex(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::uint64_t from_hex(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw CorruptionError("malformed hex digest: " + std::string(s));
  }
  return v;
}

}  // namespace cleanup
