// Apache License, Version 2.0, refer to LICENSE.txt
#include "btf/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace btf {

std::uint64_t mix_u64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("Rng::below: bound must be positive");
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % bound;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % bound;
}

double Rng::uniform() {
  // 53-bit mantissa, shifted into (0, 1).
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::invalid_argument("Rng::gamma: shape and rate must be positive");
  }
  if (shape < 1.0) {
    // Boost: X = Gamma(shape + 1) * U^{1/shape}, evaluated in log space so a
    // tiny shape yields a clamped subnormal instead of zero.
    const double boosted = gamma(shape + 1.0, rate);
    const double log_u = std::log(uniform());
    double draw = std::exp(std::log(boosted) + log_u / shape);
    if (draw < std::numeric_limits<double>::min()) {
      draw = std::numeric_limits<double>::min();
    }
    return draw;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
      return d * v / rate;
    }
  }
}

double Rng::chi_squared(double dof) { return gamma(0.5 * dof, 0.5); }

Rng Rng::fork(std::uint64_t salt) {
  return Rng(mix_u64(next_u64() ^ mix_u64(salt)));
}

}  // namespace btf
