#pragma once

#include <cstdint>
#include <random>

namespace passk {

/// Seedable random stream used by every sampling routine.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard, and uniform doubles are produced from the top 53 bits so that
/// results do not depend on the standard library's distribution classes.
///
/// Streams are split deterministically: `Rng::stream(master, index)` seeds the
/// engine with a SplitMix64 mix of the master seed and the index, so replicate
/// (or chunk) `i` of a run sees the same numbers no matter which thread
/// evaluates it or how many threads exist.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t master, std::uint64_t index) {
    return Rng(derive_seed(master, index));
  }

  /// Seed for child stream `index` of `master`.
  static std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace passk
