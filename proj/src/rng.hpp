// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0
//
// xoshiro256** (Blackman & Vigna, 2018) seeded through splitmix64. Portable
// and bit-exact across platforms, unlike std::uniform_*_distribution.
//
//   splitmix64:  x += 0x9E3779B97F4A7C15
//                z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
//                z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//                return z ^ (z >> 31)
//   state:       s[0..3] = four successive splitmix64 outputs of the seed
//   next():      result = rotl(s[1] * 5, 7) * 9, then the standard
//                xoshiro256 state transition (shift 17, rotate 45)
//   uniform():   (next() >> 11) * 2^-53, in [0, 1)

#ifndef METRIC_LENS_RNG_HPP_
#define METRIC_LENS_RNG_HPP_

#include <array>
#include <cstdint>
#include <string_view>

namespace mlens {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// FNV-1a, used to derive token ids and per-instance stream seeds.
inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = 0xCBF29CE484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
  }

  std::uint64_t next() {
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

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Lemire-free modulo; the bias for the small n
  // used here is below 2^-50.
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace mlens

#endif  // METRIC_LENS_RNG_HPP_
