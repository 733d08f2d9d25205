// Copyright (c) 2026 The recollect Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

namespace recollect {

/// Seeded 64-bit Mersenne Twister with distribution code written out by hand,
/// so streams are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n must be positive.
  std::size_t index(std::size_t n);
  double normal();
  /// Standard Gumbel(0, 1) draw: -log(-log u).
  double gumbel();

  /// Independent child stream; advances this generator by one draw.
  Rng split() { return Rng(next() ^ 0x9e3779b97f4a7c15ULL); }

  std::string state() const;
  void set_state(const std::string& s);

 private:
  std::mt19937_64 engine_;
};

}  // namespace recollect
