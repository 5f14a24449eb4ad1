#pragma once

// Atomic measures, kernel convolution and exact Wasserstein-1 distances.

#include <iosfwd>
#include <span>
#include <vector>

#include "lf/common.hpp"
#include "lf/kernels.hpp"

namespace lf {

enum class MeasureKind { probability, signed_measure };

/// Atoms with weights. Coincident atoms are kept as separate entries and
/// weights are never renormalised.
struct WeightedMeasure {
  Points atoms;
  std::vector<double> weights;
  MeasureKind kind = MeasureKind::probability;

  WeightedMeasure() = default;
  WeightedMeasure(Points atoms, std::vector<double> weights,
                  MeasureKind kind = MeasureKind::probability);

  std::size_t size() const { return weights.size(); }
  std::size_t dim() const { return atoms.dim(); }
  double total_mass() const;
  bool uniform_weights() const;
  /// Throws InputError when the invariants of `kind` are violated.
  void validate() const;
};

/// mu_N = (1/N) sum_j delta_{X_j}.
WeightedMeasure empirical_from_followers(const Points& followers);

/// mu_{m,l} = (1/m) sum_k u_{k,l} delta_{Y_k}; `direction` is zero-based.
WeightedMeasure leader_control_measure(const Points& leaders, const Points& u,
                                       std::size_t direction);

/// (H * mu)(x) = sum_j w_j H(x - atom_j).
std::vector<double> convolve_h(const KernelSpec& kernel, const WeightedMeasure& mu,
                               std::span<const double> x);
/// (G^l * mu)(x) = sum_j w_j G^l(x - atom_j).
std::vector<double> convolve_g(const KernelSpec& kernel, std::size_t direction,
                               const WeightedMeasure& mu, std::span<const double> x);

/// W1 between probability measures of equal mass.
///   d = 1: CDF integral (exact for any weights);
///   d >= 2, equal sizes, uniform weights: optimal assignment;
///   otherwise: min-cost flow on the bipartite transport graph.
double wasserstein1(const WeightedMeasure& mu, const WeightedMeasure& nu);

/// The three exact solvers, exposed for cross-checks.
double wasserstein1_sorted(const WeightedMeasure& mu, const WeightedMeasure& nu);
double wasserstein1_assignment(const WeightedMeasure& mu, const WeightedMeasure& nu);
double wasserstein1_flow(const WeightedMeasure& mu, const WeightedMeasure& nu);

/// Minimum-cost perfect matching for a dense n x n cost matrix (row-major).
/// Returns the column assigned to each row.
std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n);

/// (1/m) sum_k |Y_k - Y'_k| + W1(mu, mu').
double chi_distance(const Points& leaders_a, const WeightedMeasure& mu_a,
                    const Points& leaders_b, const WeightedMeasure& mu_b);

/// max_j |atom_j| (0 for an empty measure).
double support_radius(const WeightedMeasure& mu);

/// CSV rows `w,x_1..x_d` with a header line.
void write_measure_csv(std::ostream& os, const WeightedMeasure& mu);
WeightedMeasure read_measure_csv(std::istream& is, MeasureKind kind = MeasureKind::probability);

}  // namespace lf
