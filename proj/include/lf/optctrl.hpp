#pragma once

// Finite-N optimal control of the leader/follower system:
//
//   minimise  J(u) = int_0^T L(Y, X) + c sum_k |u_k|^2 dt
//   with      L    = 1/2 sum_i |X_i - X*_i|^2      (scale = sum)
//             L    = 1/(2N) sum_i |X_i - X*_i|^2   (scale = mean)
//
// over piecewise-constant u in the product of balls. The problem is first
// discretised (explicit Euler, trapezoid in time for L, exact piecewise
// integral for the control energy) and the discrete adjoint of that scheme is
// used, so the gradient is exact at any dt.
//
// Costate convention: xi = -lambda, where lambda is the Lagrange multiplier of
// x_{n+1} = x_n + dt f(x_n, u). With zero kernels and one follower,
// xi_X(t_n) = -(T - t_n - dt/2)(X - x*), the Euler counterpart of
// -(T - t)(X - x*).

#include <iosfwd>
#include <vector>

#include "lf/kernels.hpp"
#include "lf/microdynamics.hpp"

namespace lf {

enum class CostScale { sum, mean };

struct CostSpec {
  Points target;                // N points, or a single point shared by all followers
  double control_weight = 1.0;  // c
  double state_weight = 1.0;    // 0 removes the tracking term
  CostScale scale = CostScale::sum;

  std::span<const double> target_for(std::size_t i) const {
    return target.size() == 1 ? target[0] : target[i];
  }
  /// Throws InputError unless control_weight > 0 and the target fits N and d.
  void validate(std::size_t followers, std::size_t dim) const;
};

/// L(Y, X) at one state.
double running_cost(const SwarmState& state, const CostSpec& cost);

/// Discrete cost of an Euler trajectory.
double evaluate_cost(const Trajectory& traj, const CostSpec& cost);
double evaluate_cost(const SwarmState& initial, const ControlSignal& control, const CostSpec& cost,
                     const KernelSet& kernels, double dt);

struct AdjointState {
  Points xi_y;  // m x d
  Points xi_x;  // N x d
  double time = 0.0;
};

struct AdjointTrajectory {
  std::vector<AdjointState> states;  // same grid as the forward trajectory; states.back() is zero
  double dt = 0.0;
};

/// Backward sweep
///   xi_K = 0,
///   xi_{n-1} = -w_n grad L(x_n) + (I + dt D_x f(x_n, u_n))^T xi_n,
/// with trapezoid weights w_n. Jacobians of the kernels are analytic for
/// catalog kinds and central differences for tables.
AdjointTrajectory solve_adjoint(const Trajectory& traj, const CostSpec& cost,
                                const KernelSet& kernels);

/// L2 gradient per control piece: for piece p,
///   grad_p = (1/|p|) sum_{n in p} dt [2 c u_p - D_u f(x_n, u_p)^T xi_n],
/// so that dJ/du_p = |p| grad_p. D_u f contributes xi_Y on the leaders and
/// (1/m) sum_i G^l(X_i - Y_k) . xi_X_i on the followers.
std::vector<ControlMatrix> control_gradient(const Trajectory& traj, const AdjointTrajectory& adjoint,
                                            const CostSpec& cost, const KernelSet& kernels);

/// Convenience: forward run, adjoint and gradient in one call.
std::vector<ControlMatrix> cost_gradient(const SwarmState& initial, const ControlSignal& control,
                                         const CostSpec& cost, const KernelSet& kernels, double dt);

/// max_p |u_p - Proj(u_p - step grad_p)| / step, the norm taken over the
/// whole m x d block of a piece.
double projected_residual(const ControlSignal& control, const std::vector<ControlMatrix>& gradient,
                          double step);

struct OptimizeOptions {
  double step = 0.25;
  int max_iter = 2000;
  double tol = 1e-6;
};

struct OptimizeResult {
  ControlSignal control;
  double cost = 0.0;
  int iterations = 0;
  double optimality_residual = 0.0;
  bool converged = false;
  std::vector<double> cost_history;  // accepted iterates, starting with the initial guess
};

/// Projected gradient descent from `guess` (which fixes the piece grid and
/// u_max). Each iteration starts from opts.step and halves it, at most 40
/// times, until the cost does not increase.
OptimizeResult optimize(const SwarmState& initial, const ControlSignal& guess, const CostSpec& cost,
                        const KernelSet& kernels, double dt, const OptimizeOptions& opts = {});

/// Residual of the projected fixed-point condition at `control`.
double optimality_residual(const SwarmState& initial, const ControlSignal& control,
                           const CostSpec& cost, const KernelSet& kernels, double dt, double step);

/// CSV `t_start,t_end,u_1_1..u_m_d`, one row per piece.
void write_control_csv(std::ostream& os, const ControlSignal& control);
ControlSignal read_control_csv(std::istream& is,
                               double u_max = std::numeric_limits<double>::infinity());

/// Flat key=value summary of an optimisation result.
void write_optimize_summary(std::ostream& os, const OptimizeResult& result);

}  // namespace lf
