#pragma once

// Finite-N optimal controls against the mean-field control problem
//
//   minimise  int_0^T int 1/2 |x - x*|^2 dmu(t) + c sum_k |u_k|^2 dt
//
// where mu solves the leader-coupled continuity equation. Costs use the mean
// scaling (1/N) so that J_N(u) is the particle quadrature of the mean-field
// functional; the reference problem is the same particle discretisation at a
// large N_ref with nested initial clouds.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "lf/meanfield.hpp"
#include "lf/optctrl.hpp"

namespace lf {

struct GammaProblem {
  InitialSampler sampler;
  std::uint64_t seed = 0;
  Points leaders0;
  KernelSet kernels;
  Points target;                // a single shared point x*
  double control_weight = 1.0;
  double dt = 0.01;
  ControlSignal guess;          // piece grid, u_max and starting point of every optimisation
  OptimizeOptions options;
  std::vector<std::size_t> n_list;
  std::size_t reference_n = 0;

  CostSpec cost() const { return CostSpec{target, control_weight, 1.0, CostScale::mean}; }
  /// Initial swarm with the first n atoms of the reference cloud.
  SwarmState initial_state(std::size_t n) const;
  void validate() const;
};

/// J(u) evaluated by the particle system with n_ref atoms.
double limit_cost(const ControlSignal& control, const GammaProblem& problem, std::size_t n_ref);

struct GammaRow {
  std::size_t n = 0;
  double optimal_cost = 0.0;     // J_N(u*_N)
  double control_gap = 0.0;      // ||u*_N - u*_ref||_{L2}
  double limit_cost_estimate = 0.0;  // J_ref(u*_N)
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  ControlSignal control;
};

struct GammaSweepReport {
  std::vector<GammaRow> rows;  // increasing N
  OptimizeResult reference;    // optimisation at N_ref
};

/// Optimises at every N in the list and at N_ref (in parallel over N).
GammaSweepReport gamma_sweep(const GammaProblem& problem);

/// Residual of the mean-field optimality condition at N_ref particles. The
/// costate density is realised per particle as phi(t, X_i) = N xi_X_i(t)
/// and integrated against mu_N = (1/N) sum delta_{X_i}.
double infinite_optimality_residual(const ControlSignal& control, const GammaProblem& problem,
                                    std::size_t n_ref, double step);

/// CSV `N,J_opt,ctrl_gap,J_limit_est,converged`.
void write_gamma_csv(std::ostream& os, const GammaSweepReport& report);

}  // namespace lf
