#include "lf/binaryctrl.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>

#include <fmt/format.h>

namespace lf {

namespace {

struct BranchWeights {
  double free = 0.0;       // on H
  double led_i = 0.0;      // on G u_j in x_i
  double led_j = 0.0;      // on G u_i in x_j
  double own_i = 0.0;      // on u_i in x_i
  double own_j = 0.0;
};

BranchWeights weights(const BinaryPair& pair) {
  if (pair.mode == ThetaMode::sampled) {
    const double ti = pair.theta_i ? 1.0 : 0.0, tj = pair.theta_j ? 1.0 : 0.0;
    return {(1.0 - ti) * (1.0 - tj), (1.0 - ti) * tj, (1.0 - tj) * ti, ti, tj};
  }
  const double p = pair.p, q = 1.0 - p;
  return {q * q, p * q, p * q, p, p};
}

// x + alpha [free H(x - y) + led sum_l G^l(x - y) u_partner_l + own u_own],
// accumulated in the same order as binary_interaction.
void half_step(std::span<const double> x, std::span<const double> y, double free, double led,
               double own, std::span<const double> u_own, std::span<const double> u_partner,
               double alpha, const KernelSet& kernels, std::span<double> out) {
  const std::size_t d = x.size();
  std::vector<double> xi(d), kv(d), bracket(d, 0.0);
  for (std::size_t c = 0; c < d; ++c) xi[c] = x[c] - y[c];
  if (free != 0.0 && !kernels.h.is_zero()) {
    eval_h(kernels.h, xi, kv);
    for (std::size_t c = 0; c < d; ++c) bracket[c] += kv[c] * free;
  }
  if (led != 0.0) {
    for (std::size_t l = 0; l < d; ++l) {
      if (kernels.g[l].is_zero()) continue;
      eval_g(kernels.g[l], l, xi, kv);
      for (std::size_t c = 0; c < d; ++c) bracket[c] += kv[c] * u_partner[l] * led;
    }
  }
  for (std::size_t c = 0; c < d; ++c) out[c] = x[c] + alpha * (bracket[c] + u_own[c] * own);
}

void project_to_ball(std::vector<double>& u, double u_max) {
  ControlMatrix row(u.size(), u);
  project_to_admissible(row, u_max);
  u = row.flat();
}

void check_dims(const BinaryPair& pair, const KernelSet& kernels) {
  pair.validate();
  if (kernels.dim() != pair.xi.size()) throw InputError("binary pair: kernel dimension mismatch");
}

}  // namespace

void BinaryPair::validate() const {
  if (xi.empty() || xi.size() != xj.size()) throw InputError("binary pair: dimension mismatch");
  if (!all_finite(xi) || !all_finite(xj)) throw InputError("binary pair: non-finite coordinate");
  if (mode == ThetaMode::expectation && !(p >= 0.0 && p <= 1.0))
    throw InputError("binary pair: p must lie in [0, 1]");
}

void InstantaneousProblem::validate() const {
  if (target.empty() || !all_finite(target)) throw InputError("instantaneous problem: bad target");
  if (!(gamma > 0.0)) throw InputError("instantaneous problem: gamma must be > 0");
  if (!(dt > 0.0)) throw InputError("instantaneous problem: dt must be > 0");
  if (!(beta > 0.0 && beta <= 1.0)) throw InputError("instantaneous problem: beta must lie in (0, 1]");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("instantaneous problem: p must lie in [0, 1]");
  if (!(u_max >= 0.0)) throw InputError("instantaneous problem: u_max must be >= 0");
}

BinaryPair discrete_binary_step(const BinaryPair& pair, std::span<const double> u_i,
                                std::span<const double> u_j, double dt, const KernelSet& kernels) {
  check_dims(pair, kernels);
  const std::size_t d = pair.xi.size();
  if (u_i.size() != d || u_j.size() != d) throw InputError("discrete_binary_step: control dimension");
  const auto w = weights(pair);
  const double alpha = dt / 2;
  BinaryPair next = pair;
  half_step(pair.xi, pair.xj, w.free, w.led_i, w.own_i, u_i, u_j, alpha, kernels, next.xi);
  half_step(pair.xj, pair.xi, w.free, w.led_j, w.own_j, u_j, u_i, alpha, kernels, next.xj);
  return next;
}

InstantaneousSystem assemble_instantaneous_system(const BinaryPair& pair,
                                                  const InstantaneousProblem& prob,
                                                  const KernelSet& kernels) {
  check_dims(pair, kernels);
  prob.validate();
  const std::size_t d = pair.xi.size();
  if (prob.target.size() != d) throw InputError("instantaneous problem: target dimension mismatch");
  const auto w = weights(pair);
  const double alpha = prob.dt / 2;

  // Offset b: the step with zero controls.
  const std::vector<double> zero(d, 0.0);
  const auto b = discrete_binary_step(pair, zero, zero, prob.dt, kernels);

  // A, rows (x_i', x_j'), columns (u_i, u_j).
  const auto n = static_cast<Eigen::Index>(2 * d);
  const auto dd = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index c = 0; c < dd; ++c) {
    a(c, c) = alpha * w.own_i;
    a(dd + c, dd + c) = alpha * w.own_j;
  }
  std::vector<double> xi_ij(d), xi_ji(d), kv(d);
  for (std::size_t c = 0; c < d; ++c) {
    xi_ij[c] = pair.xi[c] - pair.xj[c];
    xi_ji[c] = -xi_ij[c];
  }
  for (std::size_t l = 0; l < d; ++l) {
    if (kernels.g[l].is_zero()) continue;
    const auto col = static_cast<Eigen::Index>(l);
    eval_g(kernels.g[l], l, xi_ij, kv);
    for (std::size_t c = 0; c < d; ++c) a(static_cast<Eigen::Index>(c), dd + col) = alpha * w.led_i * kv[c];
    eval_g(kernels.g[l], l, xi_ji, kv);
    for (std::size_t c = 0; c < d; ++c) a(dd + static_cast<Eigen::Index>(c), col) = alpha * w.led_j * kv[c];
  }

  Eigen::VectorXd residual(n);
  for (Eigen::Index c = 0; c < dd; ++c) {
    residual(c) = prob.target[static_cast<std::size_t>(c)] - b.xi[static_cast<std::size_t>(c)];
    residual(dd + c) = prob.target[static_cast<std::size_t>(c)] - b.xj[static_cast<std::size_t>(c)];
  }

  InstantaneousSystem sys;
  sys.d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index s = r; s < n; ++s) {
      const double v = prob.beta * a.col(r).dot(a.col(s));
      sys.d(r, s) = v;
      sys.d(s, r) = v;
    }
  sys.d.diagonal().array() += 2.0 * prob.gamma;
  sys.c = prob.beta * (a.transpose() * residual);
  return sys;
}

double instantaneous_objective(const BinaryPair& pair, std::span<const double> u_i,
                               std::span<const double> u_j, const InstantaneousProblem& prob,
                               const KernelSet& kernels) {
  const auto next = discrete_binary_step(pair, u_i, u_j, prob.dt, kernels);
  double state = 0.0, control = 0.0;
  for (std::size_t c = 0; c < next.xi.size(); ++c) {
    state += (prob.target[c] - next.xi[c]) * (prob.target[c] - next.xi[c]);
    state += (prob.target[c] - next.xj[c]) * (prob.target[c] - next.xj[c]);
    control += u_i[c] * u_i[c] + u_j[c] * u_j[c];
  }
  return 0.5 * prob.beta * state + prob.gamma * control;
}

FeedbackControl solve_feedback(const BinaryPair& pair, const InstantaneousProblem& prob,
                               const KernelSet& kernels) {
  const auto sys = assemble_instantaneous_system(pair, prob, kernels);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sys.d, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12)
    throw NumericalError(fmt::format("solve_feedback: D is ill-conditioned (eigenvalues {:.3g}, {:.3g})", lo, hi));
  const Eigen::VectorXd u = sys.d.llt().solve(sys.c);

  const std::size_t d = pair.xi.size();
  FeedbackControl out{std::vector<double>(d), std::vector<double>(d)};
  for (std::size_t c = 0; c < d; ++c) {
    out.u_i[c] = u(static_cast<Eigen::Index>(c));
    out.u_j[c] = u(static_cast<Eigen::Index>(d + c));
  }
  project_to_ball(out.u_i, prob.u_max);
  project_to_ball(out.u_j, prob.u_max);
  return out;
}

FeedbackRun feedback_boltzmann_run(const KineticEnsemble& ens0, const InstantaneousProblem& prob,
                                   const KernelSet& kernels, double horizon, bool apply_control) {
  ens0.validate();
  prob.validate();
  const std::size_t m = ens0.samples.size(), d = ens0.samples.dim();
  if (prob.target.size() != d || kernels.dim() != d)
    throw InputError("feedback_boltzmann_run: dimension mismatch");
  if (ens0.p != prob.p) throw InputError("feedback_boltzmann_run: ensemble p differs from problem p");
  const double ratio = horizon / prob.dt;
  const auto steps = static_cast<std::size_t>(std::llround(ratio));
  if (!(horizon > 0.0) || std::abs(ratio - static_cast<double>(steps)) > 1e-9 * ratio)
    throw InputError(fmt::format("feedback_boltzmann_run: dt = {} does not divide T = {}", prob.dt, horizon));

  const double inv_m = 1.0 / static_cast<double>(m);
  FeedbackRun run;
  Points state = ens0.samples;
  run.times.push_back(ens0.time);
  run.measures.push_back(empirical_from_followers(state));
  double discount = 1.0, cumulative = 0.0;
  Points controls(m, d);

  for (std::size_t n = 0; n < steps; ++n) {
    const std::uint64_t step = ens0.step + n;
    auto eng = make_stream(ens0.seed, StreamPurpose::collision, step);
    const auto perm = collision_pairs(eng, m);
    const std::size_t pairs = m / 2;
    std::vector<unsigned char> theta_a(pairs), theta_b(pairs);
    for (std::size_t k = 0; k < pairs; ++k) {
      theta_a[k] = uniform01(eng) < ens0.p;
      theta_b[k] = uniform01(eng) < ens0.p;
    }

    std::fill(controls.flat().begin(), controls.flat().end(), 0.0);
    Points next = state;
    std::vector<std::exception_ptr> failures(pairs);
    const auto count = static_cast<std::ptrdiff_t>(pairs);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t kk = 0; kk < count; ++kk) try {
      const auto k = static_cast<std::size_t>(kk);
      const std::size_t i = perm[2 * k], j = perm[2 * k + 1];
      BinaryPair pair{{state[i].begin(), state[i].end()}, {state[j].begin(), state[j].end()},
                      ThetaMode::expectation, false, false, ens0.p};
      if (apply_control) {
        const auto fb = solve_feedback(pair, prob, kernels);
        std::copy(fb.u_i.begin(), fb.u_i.end(), controls[i].begin());
        std::copy(fb.u_j.begin(), fb.u_j.end(), controls[j].begin());
      }
      pair.mode = ThetaMode::sampled;
      pair.theta_i = theta_a[k];
      pair.theta_j = theta_b[k];
      const auto moved = discrete_binary_step(pair, controls[i], controls[j], prob.dt, kernels);
      std::copy(moved.xi.begin(), moved.xi.end(), next[i].begin());
      std::copy(moved.xj.begin(), moved.xj.end(), next[j].begin());
    } catch (...) {
      failures[static_cast<std::size_t>(kk)] = std::current_exception();
    }
    for (const auto& f : failures)
      if (f) std::rethrow_exception(f);

    FeedbackStep row;
    row.time = ens0.time + static_cast<double>(n) * prob.dt;
    double energy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        const double e = prob.target[c] - state[i][c];
        row.state_cost += e * e;
        energy += controls[i][c] * controls[i][c];
      }
    }
    row.state_cost *= inv_m;
    energy *= inv_m;
    row.control_cost = prob.gamma * energy;
    cumulative += prob.dt * discount * (row.state_cost + row.control_cost);
    row.cumulative_discounted_cost = cumulative;
    run.discounted_state_cost += prob.dt * discount * row.state_cost;
    run.control_energy += prob.dt * energy;
    run.steps.push_back(row);
    discount *= prob.beta;

    state = std::move(next);
    run.times.push_back(ens0.time + static_cast<double>(n + 1) * prob.dt);
    run.measures.push_back(empirical_from_followers(state));
  }
  run.realized_cost = cumulative;
  return run;
}

void write_feedback_csv(std::ostream& os, const FeedbackRun& run) {
  os << "t,state_cost,control_cost,cumulative_discounted_cost\n";
  for (const auto& r : run.steps)
    os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", r.time, r.state_cost, r.control_cost,
                      r.cumulative_discounted_cost);
}

}  // namespace lf
