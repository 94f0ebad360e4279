#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>

namespace teg {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based deterministic RNG. Streams are addressed by
/// (seed, stream id); draws depend only on (seed, stream, counter), so
/// per-agent streams produce identical sequences under any thread count.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : base_(mix64(seed + 0x9E3779B97F4A7C15ULL) ^
              mix64(stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL)) {}

  std::uint64_t next_u64() { return mix64(base_ + (counter_++) * 0x9E3779B97F4A7C15ULL); }

  /// uniform in [0,1)
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// uniform in [lo,hi)
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

  /// standard normal pair (Box-Muller)
  Eigen::Vector2d next_gauss2() {
    double u1 = next_uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * M_PI * u2;
    return {r * std::cos(th), r * std::sin(th)};
  }

  /// Poisson draw (inversion by sequential search; fine for small means)
  int next_poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    double p = 1.0;
    int k = 0;
    do {
      ++k;
      p *= next_uniform();
    } while (p > limit);
    return k - 1;
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace teg
