#pragma once

#include <cmath>
#include <cstdint>

namespace leakybias {

// Counter-based generator: output k of stream `seed` is a pure function of
// (seed, k), so any draw can be recomputed in isolation and traces are
// reproducible across implementations. The mixer is the SplitMix64 finalizer
// (Steele, Lea, Flood 2014) with its published constants:
//   gamma  0x9e3779b97f4a7c15
//   mix 1  0xbf58476d1ce4e5b9
//   mix 2  0x94d049bb133111eb
struct CounterRng {
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;

  explicit CounterRng(std::uint64_t s) : seed(s) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t at(std::uint64_t seed, std::uint64_t k) {
    return mix(seed + (k + 1) * 0x9e3779b97f4a7c15ULL);
  }

  std::uint64_t next_u64() { return at(seed, counter++); }

  // Uniform on the open interval (0,1); never returns an endpoint, so it is
  // safe to feed into log().
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller on consecutive uniforms, caching the
  // second value of each pair.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_uniform();
    double u2 = next_uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  bool next_sign_bit() { return (next_u64() & 1ULL) != 0; }

 private:
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent stream for a named sub-purpose (dataset rows vs
// labels, per-cell sweep seeds, probe streams).
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) {
  return CounterRng::mix(seed ^ (tag * 0x9e3779b97f4a7c15ULL));
}

}  // namespace leakybias
