#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace sdfo {

/// Seedable generator used everywhere randomness is needed.
///
/// The engine is std::mt19937_64 (fully specified by the standard). The
/// conversions to doubles, bounded integers, normals and shuffles are written
/// out here instead of using <random> distributions, whose algorithms are
/// implementation-defined. Identical seeds therefore give identical streams on
/// every platform, which the dataset and run-log formats rely on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sdfo
