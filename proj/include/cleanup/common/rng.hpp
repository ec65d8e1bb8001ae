#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace cleanup {

/// Seeded generator with distribution helpers that are defined here rather
/// than by the standard library, so sequences are identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n), unbiased by rejection.
  std::uint64_t uniform_int(std::uint64_t n);

  bool bernoulli(double p) { return uniform01() < p; }

  /// Standard normal via Box-Muller (one draw per call, no caching).
  double normal();

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = uniform_int(i);
      std::swap(values[i - 1], values[j]);
    }
  }

  bool operator==(const Rng&) const = default;

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Derives a per-subsystem seed from a root seed and a stream label.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index = 0);

}  // namespace cleanup
