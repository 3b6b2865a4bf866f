#pragma once

// Counter-based, splittable random stream.
//
// The generator is SplitMix64 written in counter form so any other language
// can reproduce a stream bit-for-bit:
//
//   Rng(seed): key = mix64(seed), counter = 0
//   draw i (i = 1, 2, ...):  mix64(key + i * 0x9E3779B97F4A7C15)
//   mix64(z): z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//             z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//             return z ^ (z >> 31)
//   derive(tag): key' = mix64(key ^ mix64(tag + 0x632BE59BD9B4E019)), counter 0
//
// Distributions are defined here rather than taken from <random>, whose
// distribution algorithms are implementation-defined.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "tba/errors.hpp"

namespace tba {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// FNV-1a, used to turn string tags and documents into 64-bit values.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

class Rng {
 public:
  constexpr explicit Rng(std::uint64_t seed = 0) noexcept : key_(mix64(seed)) {}

  // Independent substream; does not advance this stream.
  [[nodiscard]] constexpr Rng derive(std::uint64_t tag) const noexcept {
    Rng child;
    child.key_ = mix64(key_ ^ mix64(tag + 0x632BE59BD9B4E019ULL));
    return child;
  }
  [[nodiscard]] constexpr Rng derive(std::string_view tag) const noexcept {
    return derive(fnv1a64(tag));
  }

  constexpr std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw ParameterError("uniform_int: n must be > 0");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  // Box-Muller, one variate per call (two uniforms consumed).
  double normal(double mean = 0.0, double stddev = 1.0) noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Knuth's multiplication method; large rates are split into chunks of 30.
  std::uint64_t poisson(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw ParameterError("poisson: rate must be finite and >= 0");
    }
    std::uint64_t total = 0;
    while (lambda > 30.0) {
      total += poisson_small(30.0);
      lambda -= 30.0;
    }
    return total + poisson_small(lambda);
  }

  [[nodiscard]] constexpr std::uint64_t key() const noexcept { return key_; }
  [[nodiscard]] constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t poisson_small(double lambda) noexcept {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace tba
