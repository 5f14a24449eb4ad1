#pragma once

// Instantaneous (one-step lookahead) control of a colliding pair.
//
// Over one step of length dt the pair moves by
//
//   x_i' = x_i + dt/2 [ w_h H(x_i - x_j) + w_g,i sum_l G^l(x_i - x_j) u_j,l + w_u,i u_i ]
//
// (and symmetrically for x_j), where the weights are the indicator products
// (1 - T_i)(1 - T_j), T_j (1 - T_i), T_i for sampled bits, or their Bernoulli
// expectations (1 - p)^2, p (1 - p), p. The map u -> x' is affine,
// x' = b + A u, and the controller minimises
//
//   beta/2 |X - x'|^2 + gamma |u|^2,
//
// whose stationarity system is D u = C with D = 2 gamma I + beta A^T A and
// C = beta A^T (X - b). The solution is projected per agent onto the ball
// |u| <= u_max.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lf/kernels.hpp"
#include "lf/kinetic.hpp"
#include "lf/measures.hpp"

namespace lf {

enum class ThetaMode { sampled, expectation };

struct BinaryPair {
  std::vector<double> xi, xj;
  ThetaMode mode = ThetaMode::expectation;
  bool theta_i = false, theta_j = false;  // sampled mode
  double p = 0.0;                         // expectation mode

  void validate() const;
};

struct InstantaneousProblem {
  std::vector<double> target;  // shared by both agents
  double gamma = 1.0;
  double beta = 1.0;           // per-step discount exp(-lambda dt)
  double dt = 0.1;
  double p = 0.5;
  double u_max = std::numeric_limits<double>::infinity();

  static double beta_from_rate(double lambda, double dt) { return std::exp(-lambda * dt); }
  /// Throws InputError on gamma <= 0, dt <= 0, beta outside (0, 1], p outside [0, 1].
  void validate() const;
};

/// The pair after one step with alpha = dt / 2.
BinaryPair discrete_binary_step(const BinaryPair& pair, std::span<const double> u_i,
                                std::span<const double> u_j, double dt, const KernelSet& kernels);

struct InstantaneousSystem {
  Eigen::MatrixXd d;  // 2d x 2d
  Eigen::VectorXd c;  // 2d, ordered (u_i, u_j)
};

/// Stationarity system of the instantaneous objective for the pair's mode;
/// the deployed controller uses expectation mode with p taken from the pair.
InstantaneousSystem assemble_instantaneous_system(const BinaryPair& pair,
                                                  const InstantaneousProblem& prob,
                                                  const KernelSet& kernels);

/// beta/2 |X - x'(u)|^2 + gamma |u|^2 with x' from discrete_binary_step.
double instantaneous_objective(const BinaryPair& pair, std::span<const double> u_i,
                               std::span<const double> u_j, const InstantaneousProblem& prob,
                               const KernelSet& kernels);

struct FeedbackControl {
  std::vector<double> u_i, u_j;
};

/// Projected solution of D u = C. Throws NumericalError when the condition
/// number of D exceeds 1e12.
FeedbackControl solve_feedback(const BinaryPair& pair, const InstantaneousProblem& prob,
                               const KernelSet& kernels);

struct FeedbackStep {
  double time = 0.0;
  double state_cost = 0.0;    // (1/M) sum |X - x_i|^2
  double control_cost = 0.0;  // gamma (1/M) sum |u_i|^2
  double cumulative_discounted_cost = 0.0;
};

struct FeedbackRun {
  std::vector<double> times;
  std::vector<WeightedMeasure> measures;
  std::vector<FeedbackStep> steps;  // one per dt-step, left endpoint
  double realized_cost = 0.0;       // sum dt beta^n (state + control)
  double discounted_state_cost = 0.0;
  double control_energy = 0.0;      // sum dt (1/M) sum |u_i|^2, no gamma, no discount
};

/// Feedback-controlled Boltzmann run with eta dt = 1: every step all pairs of
/// a fresh random matching interact. Each pair solves solve_feedback at its
/// pre-step states (expectation mode, p from the ensemble) and then moves by
/// the sampled binary step. apply_control = false runs the same pairings and
/// bits with u = 0.
FeedbackRun feedback_boltzmann_run(const KineticEnsemble& ens0, const InstantaneousProblem& prob,
                                   const KernelSet& kernels, double horizon,
                                   bool apply_control = true);

/// CSV `t,state_cost,control_cost,cumulative_discounted_cost`.
void write_feedback_csv(std::ostream& os, const FeedbackRun& run);

}  // namespace lf
