// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>

namespace frod {

// SplitMix64 stream. Every random draw in the project goes through this
// generator so that runs are reproducible bit-for-bit from a u64 seed and
// portable across implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller on two consecutive uniform doubles.
  // The pair's second value is cached, so draws come in deterministic order.
  double next_normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    // Map into (0, 1] so the log is finite.
    double u1 = 1.0 - next_unit();
    double u2 = next_unit();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * 3.14159265358979323846 * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

  // Uniform integer in [0, k) by rejection sampling on the high bits.
  std::uint64_t next_below(std::uint64_t k) {
    if (k <= 1) return 0;
    const int bits = std::bit_width(k - 1);
    for (;;) {
      std::uint64_t v = next_u64() >> (64 - bits);
      if (v < k) return v;
    }
  }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Child seed for trial/epoch fan-out: (seed xor index) pushed through one
// SplitMix64 step. Parallel and serial consumers see identical streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 mix(seed ^ index);
  return mix.next_u64();
}

}  // namespace frod
