#pragma once

#include <cstdint>
#include <vector>

namespace ecgdnn {

/// Deterministic 64-bit-state random source used everywhere randomness is
/// needed (initialization, shuffling, synthetic data).
///
/// Generator: splitmix64 (Steele/Lea/Flood). The integer stream is
/// platform-exact; `normal()` draws via Box-Muller on top of it, so normal
/// deviates are bit-stable given a correctly rounded libm.
class Prng {
 public:
  explicit Prng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53 bits of precision.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal deviate (Box-Muller; the pair's second value is cached).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Fisher-Yates shuffle with a fixed visit order.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Derives an independent stream from this seed and a stream index.
  /// Used to give grid-search cells and repeats their own generators.
  static std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

 private:
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace ecgdnn
