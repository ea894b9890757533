#pragma once

#include <cmath>
#include <cstdint>

namespace ffc {

/// Counter-based generator "splitmix64-boxmuller-v1": every draw is a pure
/// function of (seed, counter), so noise fields are reproducible regardless
/// of evaluation order.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform in (0,1), never exactly 0.
inline double counter_uniform(uint64_t seed, uint64_t counter) {
  uint64_t z = splitmix64(seed ^ splitmix64(counter));
  return (static_cast<double>(z >> 11) + 0.5) * 0x1p-53;
}

/// Standard normal pair from counters (2n, 2n+1) via Box-Muller.
inline void counter_gauss_pair(uint64_t seed, uint64_t n, double &g0, double &g1) {
  double u1 = counter_uniform(seed, 2 * n);
  double u2 = counter_uniform(seed, 2 * n + 1);
  double r = std::sqrt(-2.0 * std::log(u1));
  g0 = r * std::cos(2.0 * M_PI * u2);
  g1 = r * std::sin(2.0 * M_PI * u2);
}

inline constexpr const char *kRngAlgorithm = "splitmix64-boxmuller-v1";

}  // namespace ffc
