#pragma once

#include <cstdint>
#include <string_view>

namespace fakeseg {

/// PCG32 (XSH-RR variant, 64-bit LCG state, 32-bit output).
///
/// Every random draw in the toolkit goes through this generator and the
/// helpers below, never through <random> distributions, whose outputs are
/// implementation-defined. Integer draws are therefore identical on every
/// platform.
class Pcg32 {
 public:
  explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0x14057b7ef767814fULL);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform integer in [0, bound) by rejection; bound must be positive.
  std::uint32_t below(std::uint32_t bound);
  /// Uniform integer in [lo, hi).
  std::uint32_t range(std::uint32_t lo, std::uint32_t hi);
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via the Box-Muller transform.
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer, used to derive independent seeds.
std::uint64_t mix64(std::uint64_t x);

/// 64-bit FNV-1a hash of a string.
std::uint64_t fnv1a(std::string_view s);

/// Seed for a per-item stream, derived from a base seed and an item key.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view key) {
  return mix64(base ^ mix64(fnv1a(key)));
}

}  // namespace fakeseg
