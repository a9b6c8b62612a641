#include "ecgdnn/prng.hpp"

#include <cmath>

namespace ecgdnn {

std::uint64_t Prng::below(std::uint64_t n) {
  // Rejection sampling to stay unbiased; the loop terminates quickly since
  // the acceptance region is always at least half the range.
  const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Prng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  // Box-Muller. u1 is shifted into (0, 1] so log() stays finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  cached_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

std::uint64_t Prng::derive_seed(std::uint64_t master, std::uint64_t index) {
  // One splitmix64 scramble of (master ^ golden-ratio-spaced index).
  Prng p(master ^ (0x9E3779B97F4A7C15ULL * (index + 1)));
  return p.next_u64();
}

}  // namespace ecgdnn
