#pragma once

#include <cstdint>
#include <span>

namespace qlab {

/// Counter-based deterministic RNG (SplitMix64 evaluated in counter mode).
///
/// Output i of stream k under seed s is mix(key(s, k) + i * GOLDEN), where
/// mix is the SplitMix64 finalizer. Streams are split by double-mixing the
/// (seed, stream) pair, so distinct run indices get decorrelated sequences
/// and every draw is a pure function of (seed, stream, counter). This makes
/// trajectories bitwise reproducible across platforms and thread counts.
class CounterRng {
 public:
  CounterRng() : key_(mix(kGolden)), counter_(0) {}

  static CounterRng for_stream(std::uint64_t seed, std::uint64_t stream) {
    CounterRng rng;
    rng.key_ = mix(mix(seed + kGolden) + stream);
    rng.counter_ = 0;
    return rng;
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(key_ + counter_ * kGolden);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Inverse-CDF draw from a categorical distribution, scanning indices in
  /// ascending order. probs must be nonnegative; a tail deficit from rounding
  /// falls onto the last index.
  int categorical(std::span<const double> probs) {
    const double u = next_double();
    double cum = 0.0;
    const int n = static_cast<int>(probs.size());
    for (int i = 0; i < n - 1; ++i) {
      cum += probs[i];
      if (u < cum) return i;
    }
    return n - 1;
  }

  std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace qlab
