#pragma once

// Counter-based random numbers.
//
// Every stream is a SplitMix64 sequence whose 64-bit key is derived from a
// tuple of integers (master seed, community hash, years, simulation index).
// A stream is therefore reproducible in isolation, independent of scheduling.
//
// Pinned algorithm (so other implementations can reproduce the draws):
//   mix64(z):  z += 0x9e3779b97f4a7c15
//              z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//              z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//              return z ^ (z >> 31)
//   key(a0..an) = fold: k = mix64(a0); k = mix64(k ^ ai) for i >= 1
//   draw i (0-based) of stream k = mix64(k + i * 0x9e3779b97f4a7c15)
//   uniform double in [0,1) = (draw >> 11) * 2^-53
//   community hash = FNV-1a 64 over the id bytes

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string_view>

namespace ssc {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_key(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t k = 0;
  bool first = true;
  for (auto p : parts) {
    k = first ? mix64(p) : mix64(k ^ p);
    first = false;
  }
  return k;
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Signed integers are folded through their two's-complement bit pattern.
constexpr std::uint64_t as_key(long long v) noexcept { return static_cast<std::uint64_t>(v); }

class CounterRng {
 public:
  using result_type = std::uint64_t;

  constexpr explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  constexpr result_type operator()() noexcept { return mix64(key_ + (counter_++) * kGolden); }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

  // [0, 1)
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Lemire-style rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t v;
    do {
      v = (*this)();
    } while (v >= limit);
    return v % n;
  }

  // Box-Muller; one normal per two uniforms, no cached state.
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

  // Lognormal parameterized by the mean and SD of the variable itself.
  double lognormal_moments(double mean, double sd) noexcept {
    const double s2 = std::log1p((sd * sd) / (mean * mean));
    const double mu = std::log(mean) - 0.5 * s2;
    return std::exp(mu + std::sqrt(s2) * normal());
  }

  std::uint64_t poisson(double mean) noexcept {
    if (mean <= 0.0) return 0;
    if (mean > 200.0) {
      const auto half = poisson(0.5 * mean);
      return half + poisson(0.5 * mean);
    }
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double p = uniform();
    while (p > limit) {
      ++k;
      p *= uniform();
    }
    return k;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace ssc
