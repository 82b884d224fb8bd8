#pragma once

// Portable draws on top of std::mt19937_64. The standard distributions are
// implementation defined, so results would differ between standard libraries.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace vmbo::rng {

using Engine = std::mt19937_64;

// splitmix64 finalizer, used to derive independent stream seeds.
inline std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Engine stream(std::uint64_t seed, std::uint64_t index) { return Engine(mix(seed ^ mix(index + 1))); }

// Uniform on [0, 1).
inline double uniform(Engine& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

// Uniform on {0, ..., n - 1} by rejection.
inline std::uint64_t below(Engine& g, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
  std::uint64_t r;
  do {
    r = g();
  } while (r > limit);
  return r % n;
}

// Standard normal by Box-Muller, one value per call.
inline double normal(Engine& g) {
  double u1;
  do {
    u1 = uniform(g);
  } while (u1 <= 0.0);
  const double u2 = uniform(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace vmbo::rng
