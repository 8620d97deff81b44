// Seeded random number generation with portable derived values.
//
// std::mt19937_64's output sequence is fixed by the standard, but the
// <random> distributions are not; all mappings from raw engine output to
// doubles, indices and shuffles are implemented here so that a given seed
// produces the same values on every platform.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace r2iot {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1), 53 bits of it.
  double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform index in [0, n); n must be > 0. Rejection sampling keeps the
  /// draw unbiased.
  std::size_t next_index(std::size_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return static_cast<std::size_t>(v % n);
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Log-uniform double over [lo, hi); both bounds must be positive.
  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  /// In-place Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = next_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace r2iot
