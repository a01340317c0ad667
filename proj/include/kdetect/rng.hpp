#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>

namespace kdetect {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256**; satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  // Independent stream for a (seed, k1, k2, k3) key; scheduling never changes the mapping.
  static Rng stream(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2 = 0, std::uint64_t k3 = 0) {
    std::uint64_t h = seed;
    std::uint64_t acc = splitmix64(h);
    for (std::uint64_t k : {k1, k2, k3}) {
      h = acc ^ (k + 0x632be59bd9b4e019ULL);
      acc = splitmix64(h);
    }
    return Rng(acc);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double normal() { return normal_(*this); }

  // Circularly symmetric complex Gaussian with E|z|^2 = variance.
  std::complex<double> complex_normal(double variance) {
    const double sd = std::sqrt(0.5 * variance);
    const double re = normal();
    const double im = normal();
    return {sd * re, sd * im};
  }

  double exponential() { return -std::log1p(-uniform()); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<std::uint64_t, 4> s_{};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace kdetect
