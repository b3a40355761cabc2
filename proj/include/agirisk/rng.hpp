#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "agirisk/types.hpp"

namespace agirisk {

// splitmix64 step (Steele, Lea, Flood 2014). Used both as the PRNG core
// and for mixing seed components. The standard library distributions are
// implementation-defined, so all sampling below is spelled out explicitly;
// a (seed, call sequence) pair yields the same stream on every platform.
constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Collapses several seed components into one stream seed.
constexpr std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t acc = 0x243f6a8885a308d3ull;  // pi digits
  for (std::uint64_t p : parts) {
    acc ^= p + 0x9e3779b97f4a7c15ull + (acc << 6) + (acc >> 2);
    splitmix64(acc);
  }
  return acc;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive. Multiply-shift bounding; the
  // modulo bias is < 2^-32 for our range sizes and the mapping is fixed.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t draw =
        static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) *
                                    span) >> 64);
    return lo + static_cast<std::int64_t>(draw);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; consumes two uniforms per call, no cached spare.
  double normal(double mean, double sd) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Knuth's product method; adequate for the rates used here (< ~50).
  int poisson(double lambda) {
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  // Fisher-Yates with the explicit uniform_int above.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::int64_t i = static_cast<std::int64_t>(items.size()) - 1; i > 0;
         --i) {
      const std::int64_t j = uniform_int(0, i);
      std::swap(items[static_cast<size_t>(i)], items[static_cast<size_t>(j)]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace agirisk
