#pragma once

// Particle solution of the leader-coupled continuity equation
//
//   dY_k/dt = u_k,
//   d_t mu + div[(H * mu + sum_l G^l * mu_{m,l}) mu] = 0,
//
// where mu(t) is the pushforward of the initial atoms along the follower flow
// of the finite system. The particle system is exactly microdynamics'
// integrate(); this module adds the measure-level view and the numerical
// checks of stability and N -> infinity convergence.

#include <cstdint>
#include <functional>
#include <vector>

#include "lf/kernels.hpp"
#include "lf/measures.hpp"
#include "lf/microdynamics.hpp"

namespace lf {

/// Seeded initial-cloud generator. Samples are nested: the first n atoms of a
/// draw of size N > n equal the draw of size n with the same seed.
struct InitialSampler {
  enum class Kind { uniform_box, gaussian, halton_box };
  Kind kind = Kind::halton_box;
  std::vector<double> center;  // size d
  double scale = 1.0;          // half-width (boxes) or standard deviation (gaussian)

  std::size_t dim() const { return center.size(); }
  Points sample(std::size_t count, std::uint64_t seed) const;
};

struct MeanFieldTrajectory {
  std::vector<double> times;
  std::vector<Points> leader_paths;
  std::vector<WeightedMeasure> measures;
  std::size_t n_particles = 0;
  double support_bound = 0.0;  // R_T: max support radius over the run
  KernelSet kernels;
  ControlSignal control;
  double dt = 0.0;
  std::vector<std::size_t> step_piece;  // control piece used on step n -> n + 1
};

MeanFieldTrajectory solve_meanfield(const WeightedMeasure& mu0, const Points& leaders0,
                                    const ControlSignal& control, const KernelSet& kernels,
                                    double dt, Integrator method = Integrator::euler);

MeanFieldTrajectory solve_meanfield(const InitialSampler& sampler, std::uint64_t seed,
                                    std::size_t n_particles, const Points& leaders0,
                                    const ControlSignal& control, const KernelSet& kernels,
                                    double dt, Integrator method = Integrator::euler);

/// Measure-level view of a follower trajectory (uniform weights 1/N).
MeanFieldTrajectory to_meanfield(const Trajectory& traj, const KernelSet& kernels);

/// Smooth compactly supported test function exp(1/((|x-c|/r)^2 - 1)) on B(c, r).
struct BumpFunction {
  std::vector<double> center;
  double radius = 1.0;

  double value(std::span<const double> x) const;
  void gradient(std::span<const double> x, std::span<double> out) const;
};

/// |<phi, mu(t1)> - <phi, mu(t0)> - int_{t0}^{t1} <grad phi . v, mu> dt| with
/// the time integral by the trapezoid rule on the trajectory grid. t0 and t1
/// are snapped to the nearest grid times.
double weak_residual(const MeanFieldTrajectory& traj, const BumpFunction& phi, double t0,
                     double t1);

struct MeanFieldProblem {
  Points initial_atoms;  // uniform weights
  Points leaders0;
  ControlSignal control;
  KernelSet kernels;
  double dt = 0.01;
  Integrator method = Integrator::euler;
};

struct Perturbation {
  double leader_shift = 0.0;  // leaders move by this distance along a seeded unit vector
  double atom_jitter = 0.0;   // atoms move by jitter * (1 + 0.5 sin(x.e + phase)) along e
};

struct StabilityReport {
  double chi_initial = 0.0;
  double chi_max = 0.0;
  double ratio = 0.0;          // chi_max / chi_initial
  double c_tilde = 0.0;        // 2 L_H + d L_G max|u|
  double bound = 0.0;          // exp(c_tilde * T)
  std::vector<double> chi;     // per grid time
};

/// Perturbs the initial data (same control), runs both problems and reports
/// the amplification of the chi-distance. The atom perturbation is a smooth
/// map, monotone along e when jitter < 2, so in d = 1 the initial W1 equals
/// the matched displacement.
StabilityReport stability_experiment(const MeanFieldProblem& base, const Perturbation& perturbation,
                                     std::uint64_t seed);

struct ConvergenceRow {
  std::size_t n = 0;
  double max_w1 = 0.0;
  double max_leader_err = 0.0;
  double runtime_s = 0.0;
};

struct ConvergenceStudy {
  InitialSampler sampler;
  std::uint64_t seed = 0;
  Points leaders0;
  KernelSet kernels;
  double dt = 0.01;
  std::vector<std::size_t> n_list;
  std::size_t reference_n = 0;
  ControlSignal reference_control;
  /// Control used for a given N; defaults to reference_control.
  std::function<ControlSignal(std::size_t)> control_for;
  bool measure_time = false;
};

/// Rows ordered by N. Runs for different N execute in parallel.
std::vector<ConvergenceRow> convergence_study(const ConvergenceStudy& study);

/// CSV `N,max_W1,max_leader_err,runtime_s`.
void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows);

}  // namespace lf
