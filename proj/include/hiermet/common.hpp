#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace hiermet {

// Bad inputs: malformed files, inconsistent shapes, configs that cannot be
// satisfied by the data (e.g. a rank with no realizable pair).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric trouble at runtime: degenerate pre-normalization vectors,
// non-finite gradients.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// All randomness goes through mt19937 with the samplers below, so results
// are bit-identical across platforms and standard library versions.
using Rng = std::mt19937;

inline double uniform01(Rng& rng) {
  // 32 bits of resolution in [0, 1)
  return std::ldexp(static_cast<double>(rng()), -32);
}

inline double uniform_in(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// uniform integer in [0, n)
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  // rejection sampling to avoid modulo bias
  const std::uint64_t limit = 0x100000000ULL - 0x100000000ULL % n;
  std::uint64_t x = rng();
  while (n > 1 && x >= limit) x = rng();
  return static_cast<std::size_t>(x % n);
}

inline double normal01(Rng& rng) {
  // Box-Muller; u1 in (0,1] so the log is finite
  const double u1 = std::ldexp(static_cast<double>(rng()) + 1.0, -32);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// splitmix64-style mixing so per-epoch / per-batch streams are decorrelated
inline std::uint32_t mix_seed(std::uint32_t seed, std::uint64_t stream) {
  std::uint64_t z = (static_cast<std::uint64_t>(seed) << 32) ^ stream;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return static_cast<std::uint32_t>(z ^ (z >> 31));
}

// Shortest decimal string that parses back to exactly the same double.
// Keeps CSV/JSON outputs byte-stable and round-trippable.
std::string format_double(double value);

}  // namespace hiermet
