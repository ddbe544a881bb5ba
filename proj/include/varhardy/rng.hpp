#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace varhardy {

/// SplitMix64 finalizer. Used to derive independent per-trial seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of trial `index` under master seed `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 1));
}

/// Deterministic, platform-independent random source.
///
/// The raw stream is std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. The std distributions are implementation-defined, so all
/// conversions are done here:
///   uniform()  = (x >> 11) * 2^-53                 in [0, 1)
///   normal()   = Box-Muller, sqrt(-2 ln u1) cos(2 pi u2), u1 = 1 - uniform()
///   below(n)   = x mod n, redrawing while x >= M - M mod n, M = 2^64 - 1
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace varhardy
