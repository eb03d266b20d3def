#pragma once

#include <cmath>
#include <cstdint>

namespace qprop {

// Counter-based generator (SplitMix64 applied to seed + k*golden): the k-th
// draw depends only on (seed, k), never on wall clock, environment entropy or
// call history, so every sampled certificate is replayable from its seed.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1))), counter_(0) {}

  std::uint64_t next_u64() { return mix(seed_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // Uniform in [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; consumes exactly two counter steps per call.
  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace qprop
