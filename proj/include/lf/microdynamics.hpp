#pragma once

// Finite leader/follower system
//
//   dY_k/dt = u_k                                                  k = 1..m
//   dX_i/dt = (1/N) sum_j H(X_i - X_j)
//             + sum_l (1/m) sum_k G^l(X_i - Y_k) u_{k,l}             i = 1..N
//
// under piecewise-constant leader velocities u(t) in the product of balls
// |u_k| <= u_max.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "lf/common.hpp"
#include "lf/kernels.hpp"

namespace lf {

struct SwarmState {
  Points leaders;    // m x d
  Points followers;  // N x d
  double time = 0.0;

  std::size_t dim() const { return followers.dim(); }
  void validate() const;
};

/// One leader-velocity matrix (m rows of R^d).
using ControlMatrix = Points;

/// Radial clamp of each leader velocity onto B(0, u_max).
void project_to_admissible(ControlMatrix& u, double u_max);

class ControlSignal {
 public:
  ControlSignal() = default;
  ControlSignal(std::vector<double> breakpoints, std::vector<ControlMatrix> values,
                double u_max = std::numeric_limits<double>::infinity());

  /// A single piece on [0, horizon].
  static ControlSignal constant(double horizon, ControlMatrix value,
                                double u_max = std::numeric_limits<double>::infinity());
  /// `pieces` equal pieces on [0, horizon], all zero.
  static ControlSignal zeros(double horizon, std::size_t pieces, std::size_t leaders,
                             std::size_t dim,
                             double u_max = std::numeric_limits<double>::infinity());

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<ControlMatrix>& values() const { return values_; }
  std::vector<ControlMatrix>& values() { return values_; }
  std::size_t pieces() const { return values_.size(); }
  std::size_t leaders() const { return values_.empty() ? 0 : values_.front().size(); }
  std::size_t dim() const { return values_.empty() ? 0 : values_.front().dim(); }
  double horizon() const { return breakpoints_.back(); }
  double u_max() const { return u_max_; }
  double piece_length(std::size_t p) const { return breakpoints_[p + 1] - breakpoints_[p]; }

  /// Value on the piece containing t (pieces are [t_p, t_{p+1}), the last one closed).
  const ControlMatrix& at(double t) const;
  std::size_t piece_index(double t) const;

  void project();
  bool admissible(double tol = 1e-12) const;

  /// Number of dt-steps in each piece; throws InputError when a piece length
  /// is not an integer multiple of dt.
  std::vector<std::size_t> steps_per_piece(double dt) const;

  /// Squared L2 distance sum_p |piece| * |u_p - v_p|^2 (same piece grid).
  double l2_distance(const ControlSignal& other) const;

 private:
  std::vector<double> breakpoints_;
  std::vector<ControlMatrix> values_;
  double u_max_ = std::numeric_limits<double>::infinity();
};

enum class Integrator { euler, rk4 };

struct Trajectory {
  std::vector<SwarmState> states;  // states[n].time == n * dt
  ControlSignal control;
  double dt = 0.0;
  Integrator method = Integrator::euler;
  /// Piece index used on step n -> n + 1.
  std::vector<std::size_t> step_piece;
};

struct Drift {
  Points leaders;    // dY
  Points followers;  // dX
};

/// Right-hand side of the system for a fixed control value. The H-sum includes
/// j = i (H(0) is evaluated).
Drift drift(const SwarmState& state, const ControlMatrix& u, const KernelSet& kernels);

/// Same as drift() writing into preallocated buffers.
void drift_into(const SwarmState& state, const ControlMatrix& u, const KernelSet& kernels,
                Drift& out);

/// Integrates on the uniform grid t_n = n dt up to the control horizon.
Trajectory integrate(const SwarmState& initial, const ControlSignal& control,
                     const KernelSet& kernels, double dt, Integrator method = Integrator::euler);

/// ||z|| = (1/m) sum |Y_k| + (1/N) sum |X_i|.
double state_norm(const SwarmState& state);
/// ||z1 - z2|| in the same norm.
double state_distance(const SwarmState& a, const SwarmState& b);

struct AprioriReport {
  bool growth_ok = false;
  double growth_bound = 0.0;   // (||z0|| + C T) e^{C T}
  double max_norm = 0.0;
  double lipschitz_constant = 0.0;
};

/// Checks the linear-growth bound and reports the time-Lipschitz constant of
/// the trajectory. The norm is a norm, so the maximum difference quotient over
/// all grid pairs is attained on consecutive grid points.
AprioriReport check_apriori_bounds(const Trajectory& traj, double c_tilde);

/// C~ such that ||dz/dt|| <= C~ (1 + ||z||): u_max + 2 C_H + d C_G u_max.
double apriori_constant(const KernelSet& kernels, double u_max);

/// CSV with header t,Y_1_1..Y_m_d,X_1_1..X_N_d and 17 significant digits.
/// `stride` keeps every stride-th state (and always the last one).
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, std::size_t stride = 1);

}  // namespace lf
