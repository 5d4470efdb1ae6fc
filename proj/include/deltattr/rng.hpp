// Seeded PRNG used everywhere randomness is needed (weight init, data
// generation, shuffles, the random attribution control). SplitMix64 is fully
// specified here so sequences can be reproduced in any language:
//
//   state' = state + 0x9E3779B97F4A7C15
//   z = state'; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB; output = z ^ (z >> 31)
//
// uniform01() maps the top 53 bits to [0, 1). normal() is plain Box-Muller
// over two uniform01() draws (no cached spare, two draws per call).
// Derived streams (per series, per target) come from derive_stream(), which
// double-mixes (seed, index) so streams are unrelated regardless of index
// spacing. None of the std <random> distributions are used: their output is
// implementation-defined and would break cross-platform determinism.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace deltattr {

class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  // [0, 1)
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal() {
    double u1 = 1.0 - uniform01();  // (0, 1], keeps log() finite
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n) by rejection, bias-free.
  uint64_t uniform_int(uint64_t n) {
    uint64_t limit = n * ((~uint64_t{0}) / n);
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

 private:
  uint64_t state_;
};

// Independent stream for (seed, index); used for per-series / per-target
// generators so parallel order never matters.
inline uint64_t derive_stream(uint64_t seed, uint64_t index) {
  return SplitMix64::mix(SplitMix64::mix(seed) ^ (index + 0x9E3779B97F4A7C15ULL));
}

// Fisher-Yates with the seeded generator.
template <typename T>
void shuffle(std::vector<T>& items, SplitMix64& rng) {
  for (size_t i = items.size(); i > 1; --i) {
    size_t j = rng.uniform_int(i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace deltattr
