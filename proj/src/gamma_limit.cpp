#include "lf/gamma_limit.hpp"

#include <cmath>
#include <exception>
#include <ostream>

#include <fmt/format.h>

namespace lf {

void GammaProblem::validate() const {
  if (target.size() != 1) throw InputError("gamma problem: target must be a single shared point");
  if (target.dim() != sampler.dim()) throw InputError("gamma problem: target dimension mismatch");
  if (n_list.empty()) throw InputError("gamma problem: empty N list");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1]) throw InputError("gamma problem: N list must be strictly increasing");
  if (reference_n <= n_list.back())
    throw InputError("gamma problem: reference N must exceed every N in the list");
  if (guess.pieces() == 0) throw InputError("gamma problem: control guess has no pieces");
}

SwarmState GammaProblem::initial_state(std::size_t n) const {
  return SwarmState{leaders0, sampler.sample(n, seed), 0.0};
}

double limit_cost(const ControlSignal& control, const GammaProblem& problem, std::size_t n_ref) {
  return evaluate_cost(problem.initial_state(n_ref), control, problem.cost(), problem.kernels,
                       problem.dt);
}

GammaSweepReport gamma_sweep(const GammaProblem& problem) {
  problem.validate();
  const Points cloud = problem.sampler.sample(problem.reference_n, problem.seed);
  const CostSpec cost = problem.cost();

  // Index n_list.size() is the reference problem.
  const std::size_t jobs = problem.n_list.size() + 1;
  std::vector<OptimizeResult> results(jobs);
  std::vector<std::exception_ptr> failures(jobs);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t j = static_cast<std::ptrdiff_t>(jobs) - 1; j >= 0; --j) try {
    const auto idx = static_cast<std::size_t>(j);
    const std::size_t n = idx < problem.n_list.size() ? problem.n_list[idx] : problem.reference_n;
    const SwarmState s0{problem.leaders0, cloud.head(n), 0.0};
    results[idx] = optimize(s0, problem.guess, cost, problem.kernels, problem.dt, problem.options);
  } catch (...) {
    failures[static_cast<std::size_t>(j)] = std::current_exception();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  GammaSweepReport report;
  report.reference = results.back();
  const SwarmState reference_state{problem.leaders0, cloud, 0.0};
  for (std::size_t i = 0; i < problem.n_list.size(); ++i) {
    const auto& r = results[i];
    GammaRow row;
    row.n = problem.n_list[i];
    row.optimal_cost = r.cost;
    row.control_gap = std::sqrt(r.control.l2_distance(report.reference.control));
    row.limit_cost_estimate =
        evaluate_cost(reference_state, r.control, cost, problem.kernels, problem.dt);
    row.converged = r.converged;
    row.iterations = r.iterations;
    row.residual = r.optimality_residual;
    row.control = r.control;
    report.rows.push_back(std::move(row));
  }
  return report;
}

double infinite_optimality_residual(const ControlSignal& control, const GammaProblem& problem,
                                    std::size_t n_ref, double step) {
  const SwarmState s0 = problem.initial_state(n_ref);
  const CostSpec cost = problem.cost();
  const auto traj = integrate(s0, control, problem.kernels, problem.dt, Integrator::euler);
  const auto adjoint = solve_adjoint(traj, cost, problem.kernels);

  const std::size_t d = s0.dim(), m = control.leaders();
  const double n = static_cast<double>(n_ref);
  const double weight = 1.0 / n;  // mu_N = (1/N) sum delta_{X_i}
  const double inv_m = m > 0 ? 1.0 / static_cast<double>(m) : 0.0;
  const auto& kernels = problem.kernels;
  const bool use_g = m > 0 && !kernels.g_is_zero();

  std::vector<ControlMatrix> grad(control.pieces(), ControlMatrix(m, d));
  std::vector<double> diff(d), gv(d);
  for (std::size_t s = 0; s + 1 < traj.states.size(); ++s) {
    const std::size_t p = traj.step_piece[s];
    const auto& state = traj.states[s];
    const auto& xi = adjoint.states[s];
    const auto& u = control.values()[p];
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t l = 0; l < d; ++l) {
        // (1/m) int G^l(x - Y_k) . phi(t, x) dmu_N(x) with phi(t, X_i) = N xi_X_i(t).
        double coupling = xi.xi_y[k][l];
        if (use_g && !kernels.g[l].is_zero()) {
          double s_int = 0.0;
          for (std::size_t i = 0; i < state.followers.size(); ++i) {
            for (std::size_t c = 0; c < d; ++c) diff[c] = state.followers[i][c] - state.leaders[k][c];
            eval_g(kernels.g[l], l, diff, gv);
            for (std::size_t c = 0; c < d; ++c) s_int += gv[c] * (weight * (n * xi.xi_x[i][c]));
          }
          coupling += inv_m * s_int;
        }
        grad[p][k][l] += traj.dt * (2.0 * cost.control_weight * u[k][l] - coupling);
      }
    }
  }
  for (std::size_t p = 0; p < grad.size(); ++p)
    for (double& v : grad[p].flat()) v /= control.piece_length(p);
  return projected_residual(control, grad, step);
}

void write_gamma_csv(std::ostream& os, const GammaSweepReport& report) {
  os << "N,J_opt,ctrl_gap,J_limit_est,converged\n";
  for (const auto& r : report.rows)
    os << fmt::format("{},{:.17g},{:.17g},{:.17g},{}\n", r.n, r.optimal_cost, r.control_gap,
                      r.limit_cost_estimate, r.converged ? 1 : 0);
}

}  // namespace lf
