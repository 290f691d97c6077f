#pragma once

#include <cstdint>

namespace tfln {

/// Deterministic counter-based random stream (splitmix64 over seed + counter).
///
/// The entire framework draws randomness through this type so that a run is a
/// pure function of its seeds: the same seed and the same call sequence
/// produce bit-identical values on every platform. Copying an RngState forks
/// the stream at its current position.
class RngState {
 public:
  explicit RngState(std::uint64_t seed) : seed_(seed), counter_(0) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased uniform integer in [0, n). Requires n >= 1.
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection sampling over the top of the 64-bit range.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace tfln
