// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace csidn {

// splitmix64 finalizer; the basis for all seed derivation.
constexpr uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a over a string literal; used to derive per-purpose seed streams.
constexpr uint64_t seed_tag(const char* s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  while (*s != '\0') {
    h ^= static_cast<uint64_t>(static_cast<unsigned char>(*s++));
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr uint64_t seed_mix(uint64_t a) { return splitmix64(a); }

// Order-sensitive combination of seed components. seed_mix(master, index)
// gives every (stream, index) pair its own independent generator, so work
// can be reordered or parallelized without changing any drawn value.
template <typename... Rest>
constexpr uint64_t seed_mix(uint64_t a, uint64_t b, Rest... rest) {
  return seed_mix(splitmix64(a ^ (b + 0x9e3779b97f4a7c15ULL)), rest...);
}

// Deterministic random source. Gaussians use Box-Muller on explicit 53-bit
// uniforms instead of std::normal_distribution, whose algorithm is
// implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();  // log(0) guard
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double gaussian(double mean, double stddev) {
    return mean + stddev * gaussian();
  }

  // Normal with rejection outside +/- cut standard deviations.
  double truncated_normal(double stddev, double cut = 2.0) {
    double z = gaussian();
    while (std::abs(z) > cut) z = gaussian();
    return stddev * z;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace csidn
