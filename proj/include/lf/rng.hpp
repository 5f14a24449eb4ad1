#pragma once

// Seeded random streams.
//
// A stream is a std::mt19937_64 keyed by (seed, purpose, index). Parallel
// code never shares an engine: each unit of work (a time step, a sample
// batch) derives its own stream from its index, and draws within the unit are
// consumed in a fixed order. Results therefore do not depend on the number of
// threads.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>

namespace lf {

enum class StreamPurpose : std::uint32_t {
  kernel_certificate = 1,
  initial_sample = 2,
  perturbation = 3,
  collision = 4,
  instance = 5,
};

inline std::mt19937_64 make_stream(std::uint64_t seed, StreamPurpose purpose,
                                   std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(eng);
}

/// Standard normal via Box-Muller (deterministic across standard libraries).
inline double standard_normal(std::mt19937_64& eng) {
  double u1 = uniform01(eng);
  while (u1 <= 0.0) u1 = uniform01(eng);
  const double u2 = uniform01(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
}

/// Uniform integer in [0, n) by rejection (n > 0).
inline std::uint64_t uniform_index(std::mt19937_64& eng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = eng();
  } while (x >= limit);
  return x % n;
}

/// Uniform point in the closed ball B(0, radius), written into out.
inline void uniform_in_ball(std::mt19937_64& eng, double radius, std::span<double> out) {
  double r2 = 0.0;
  for (double& x : out) {
    x = standard_normal(eng);
    r2 += x * x;
  }
  const double len = std::sqrt(r2);
  const double scale =
      radius * std::pow(uniform01(eng), 1.0 / static_cast<double>(out.size())) /
      (len > 0.0 ? len : 1.0);
  for (double& x : out) x *= scale;
}

}  // namespace lf
