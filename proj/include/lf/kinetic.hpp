#pragma once

// Binary-interaction Monte Carlo for the controlled Boltzmann-type model.
//
// In one interaction of agents at x and y with control indicators
// Theta, Theta* ~ Bernoulli(p),
//
//   x' = x + alpha [ H(x - y) (1 - Theta)(1 - Theta*)
//                    + sum_l G^l(x - y) u*_l (1 - Theta) Theta*
//                    + u Theta ],
//
// and y' is the same rule with the roles of the two agents exchanged. Under
// alpha = eps, eta = 1/eps and eps -> 0 the ensemble follows the transport
// equation with the averaged kernel
//
//   <K>(x, y) = (1 - p)^2 H(x - y) + p (1 - p) sum_l G^l(x - y) u*_l + p u.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "lf/kernels.hpp"
#include "lf/meanfield.hpp"
#include "lf/microdynamics.hpp"
#include "lf/rng.hpp"

namespace lf {

struct KineticEnsemble {
  Points samples;            // M points
  double p = 0.0;            // probability that an agent is controlled
  std::uint64_t seed = 0;    // stream key; the step counter selects the stream
  std::uint64_t step = 0;
  double time = 0.0;

  void validate() const;
};

/// Time-dependent controls: u acts on controlled agents, u* is the control
/// seen through the leader kernels when the partner is controlled. Both are
/// single-row piecewise-constant signals.
struct KineticControls {
  ControlSignal u;
  ControlSignal u_star;

  static KineticControls constant(double horizon, std::vector<double> u, std::vector<double> u_star);
  std::span<const double> u_at(double t) const { return u.at(t)[0]; }
  std::span<const double> u_star_at(double t) const { return u_star.at(t)[0]; }
};

void binary_interaction(std::span<const double> x, std::span<const double> y, bool theta,
                        bool theta_star, std::span<const double> u, std::span<const double> u_star,
                        double alpha, const KernelSet& kernels, std::span<double> out);
std::vector<double> binary_interaction(std::span<const double> x, std::span<const double> y,
                                       bool theta, bool theta_star, std::span<const double> u,
                                       std::span<const double> u_star, double alpha,
                                       const KernelSet& kernels);

/// Random perfect matching of the agents for one step: agents
/// perm[2k], perm[2k+1] form pair k (with odd M the last agent sits out).
std::vector<std::size_t> collision_pairs(std::mt19937_64& eng, std::size_t agents);

/// One Nanbu-Babovsky step: every pair of the matching interacts with
/// probability eta dt, both agents are updated from their pre-step states.
/// Throws ConfigError when eta dt > 1.
KineticEnsemble boltzmann_step(const KineticEnsemble& ens, double eta, double alpha, double dt,
                               const KineticControls& controls, const KernelSet& kernels);

void limit_kernel(std::span<const double> x, std::span<const double> y, std::span<const double> u_bar,
                  std::span<const double> u_star_bar, double p, const KernelSet& kernels,
                  std::span<double> out);
std::vector<double> limit_kernel(std::span<const double> x, std::span<const double> y,
                                 std::span<const double> u_bar, std::span<const double> u_star_bar,
                                 double p, const KernelSet& kernels);

/// Particle Euler solution of d_t mu + div[(<K> * mu) mu] = 0 from the given
/// atoms (uniform weights), horizon taken from the controls.
MeanFieldTrajectory solve_limit_pde(const Points& atoms, double p, const KineticControls& controls,
                                    const KernelSet& kernels, double dt);

struct KineticSweep {
  std::vector<double> eps_list;  // decreasing
  std::size_t samples = 1000;    // M
  double p = 0.0;
  KineticControls controls;
  KernelSet kernels;
  InitialSampler sampler;
  std::vector<std::uint64_t> seeds;
  double limit_dt = 0.01;        // must divide every eps
  bool measure_time = false;
};

struct KineticSweepRow {
  double eps = 0.0;
  std::uint64_t seed = 0;
  double max_w1 = 0.0;
  double runtime_s = 0.0;
};

/// For every (eps, seed): alpha = dt = eps, eta = 1/eps, the Monte Carlo
/// ensemble and the limit solver start from the same M atoms and are compared
/// by W1 at every Monte Carlo time. Rows ordered by eps (as given), then seed.
std::vector<KineticSweepRow> quasi_invariant_sweep(const KineticSweep& sweep);

/// Median of max_w1 per eps, in eps_list order.
std::vector<double> sweep_medians(const KineticSweep& sweep, const std::vector<KineticSweepRow>& rows);

/// CSV `eps,seed,max_W1,runtime_s`.
void write_kinetic_csv(std::ostream& os, const std::vector<KineticSweepRow>& rows);

}  // namespace lf
