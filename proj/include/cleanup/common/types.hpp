#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <string_view>

namespace cleanup {

struct Pos {
  int x = 0;
  int y = 0;
  auto operator<=>(const Pos&) const = default;
};

inline Pos operator+(Pos a, Pos b) { return {a.x + b.x, a.y + b.y}; }

inline int chebyshev(Pos a, Pos b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }

/// Whether peers' identities and contribution levels are observable.
enum class Condition : std::uint8_t { identifiable, anonymous };

std::string_view to_string(Condition c);
Condition parse_condition(std::string_view s);

inline constexpr int kGroupSize = 5;

}  // namespace cleanup
