// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <random>

namespace btf {

// Seeded random stream. An identical seed yields an identical draw sequence
// on every platform (the engine and all transforms are fully specified here,
// none delegate to unspecified standard-library distributions).
//
// fork() derives a decorrelated child stream and advances the parent, so a
// parallel section can hand one child per work item and stay deterministic
// regardless of thread count. A single Rng must not be shared across
// concurrent callers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform on [0, bound); rejection sampled, no modulo bias.
  std::uint64_t below(std::uint64_t bound);
  // Uniform on the open interval (0, 1).
  double uniform();
  // Standard normal (Box-Muller, no cached spare).
  double normal();
  // Gamma(shape, rate), density proportional to x^{shape-1} exp(-rate x).
  // Marsaglia-Tsang; shapes below one are boosted and can underflow toward
  // zero, in which case the draw is clamped to the smallest positive double.
  double gamma(double shape, double rate);
  double chi_squared(double dof);

  Rng fork(std::uint64_t salt);

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 scramble; used for seed derivation.
std::uint64_t mix_u64(std::uint64_t x);

}  // namespace btf
