// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace tokpool {

/// Deterministic generator used for every seeded operation.
///
/// Algorithm (fixed, so seeded runs reproduce across platforms):
///   * state: four 64-bit words filled by four successive splitmix64 outputs
///     starting from `seed` (splitmix64 increment 0x9E3779B97F4A7C15,
///     mixers 0xBF58476D1CE4E5B9 / 0x94D049BB133111EB, shifts 30/27/31);
///   * next_u64: xoshiro256** (rotl(s1 * 5, 7) * 9, state update with
///     shift 17 and rotation 45);
///   * uniform: top 53 bits of next_u64 scaled by 2^-53, in [0, 1);
///   * normal: Box-Muller on two uniforms, u1 mapped to (0, 1] as 1 - u,
///     cosine branch only (one normal per two uniforms, no caching).
/// No std:: distribution is used because their outputs are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;
  double uniform() noexcept;
  double normal() noexcept;
  /// Uniform integer in [0, bound) by rejection; returns 0 when bound is 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

 private:
  std::uint64_t s_[4];
};

/// One splitmix64 step: advances `state` and returns the mixed output.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

}  // namespace tokpool
