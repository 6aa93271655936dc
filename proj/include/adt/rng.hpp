// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

#include "adt/common.hpp"

namespace adt {

// Deterministic counter-style RNG (splitmix64 core). The whole generator
// state is one u64, so checkpoints can capture and restore it bit-exactly,
// and per-chain streams are derived as seed ^ chain-index.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in (0, 1]; never 0, so log(u) is always finite.
  double uniform() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (cosine branch only; no cached spare,
  // which keeps the serializable state to the bare counter).
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // Uniform integer in [0, n) via the 128-bit multiply reduction.
  long below(long n) {
    if (n <= 0) throw ContractError("Rng::below: n must be positive");
    return static_cast<long>((static_cast<unsigned __int128>(next_u64()) *
                              static_cast<unsigned __int128>(n)) >> 64);
  }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  std::uint64_t state_;
};

}  // namespace adt
