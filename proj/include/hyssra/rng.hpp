#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

namespace hyssra {

/// Engine used for every stochastic operation. The draws below are written out
/// by hand so that a seed reproduces the same stream on any standard library.
using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept {
  return splitmix64(seed ^ splitmix64(value + 0x632be59bd9b4e019ULL));
}

/// Maps 64 random bits to the open interval (0, 1).
constexpr double bits_to_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

template <class URBG>
double uniform_unit(URBG& rng) {
  return bits_to_unit(static_cast<std::uint64_t>(rng()));
}

template <class URBG>
double uniform_real(URBG& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

/// Uniform integer in [0, n). Multiply-shift on the top 32 bits; bias is below 2^-32 * n.
template <class URBG>
int uniform_index(URBG& rng, int n) {
  const std::uint64_t top = static_cast<std::uint64_t>(rng()) >> 32;
  return static_cast<int>((top * static_cast<std::uint64_t>(n)) >> 32);
}

template <class URBG>
bool bernoulli(URBG& rng, double p) {
  return uniform_unit(rng) < p;
}

/// Box-Muller pair from two uniforms; both outputs are N(0, 1).
inline std::complex<double> box_muller(double u1, double u2) {
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

template <class URBG>
double standard_normal(URBG& rng) {
  const double u1 = uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  return box_muller(u1, u2).real();
}

/// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
template <class URBG>
std::complex<double> complex_normal(URBG& rng, double variance) {
  const double u1 = uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  if (variance <= 0.0) return {0.0, 0.0};
  return std::sqrt(variance / 2.0) * box_muller(u1, u2);
}

}  // namespace hyssra
