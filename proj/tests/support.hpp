#pragma once

// Small helpers shared by the unit tests: seeded generators for property
// tests and brute-force oracles that do not reuse library code paths.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "lf/common.hpp"

namespace lf::test {

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed * 0x9E3779B97F4A7C15ULL + 1); }

inline double uni(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline Points random_points(std::mt19937_64& g, std::size_t n, std::size_t d, double half = 2.0) {
  Points p(n, d);
  for (auto& x : p.flat()) x = uni(g, -half, half);
  return p;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// Exact W1 between two uniform clouds of equal size by enumerating every
/// permutation (n <= 8).
inline double brute_force_w1(const Points& a, const Points& b) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) s += distance(a[i], b[perm[i]]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(a.size());
}

}  // namespace lf::test
