#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace mvd {

/// Seeded RNG used everywhere reproducibility matters. Uniform draws are
/// derived from raw engine output so results are stable across standard
/// library implementations.
struct Rng {
  std::mt19937_64 gen;

  explicit Rng(std::uint64_t seed) : gen(seed) {}

  std::uint64_t next() { return gen(); }

  double uniform() {  // [0, 1)
    return static_cast<double>(gen() >> 11) * (1.0 / 9007199254740992.0);
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  int index(int n) {  // [0, n)
    if (n <= 0) return 0;
    return static_cast<int>(gen() % static_cast<std::uint64_t>(n));
  }
};

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  a ^= b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2);
  return a;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace mvd
