#include "lf/optctrl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

namespace lf {

void CostSpec::validate(std::size_t followers, std::size_t dim) const {
  if (!(control_weight > 0.0) || !std::isfinite(control_weight))
    throw InputError("cost: control_weight must be positive");
  if (!(state_weight >= 0.0) || !std::isfinite(state_weight))
    throw InputError("cost: state_weight must be >= 0");
  if (target.size() != 1 && target.size() != followers)
    throw InputError(fmt::format("cost: target has {} points, expected 1 or {}", target.size(),
                                 followers));
  if (target.dim() != dim) throw InputError("cost: target dimension mismatch");
}

namespace {

double state_factor(const CostSpec& cost, std::size_t n) {
  return cost.scale == CostScale::mean ? cost.state_weight / static_cast<double>(n)
                                       : cost.state_weight;
}

double trapezoid_weight(std::size_t n, std::size_t last, double dt) {
  return (n == 0 || n == last) ? 0.5 * dt : dt;
}

void check_grid(const Trajectory& traj) {
  if (traj.method != Integrator::euler)
    throw InputError("optimal control: the discrete adjoint requires an Euler trajectory");
  if (traj.states.size() != traj.step_piece.size() + 1)
    throw InputError("optimal control: trajectory grid and step pieces disagree");
}

}  // namespace

double running_cost(const SwarmState& state, const CostSpec& cost) {
  const std::size_t n = state.followers.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dist = distance(state.followers[i], cost.target_for(i));
    s += dist * dist;
  }
  return 0.5 * state_factor(cost, n) * s;
}

double evaluate_cost(const Trajectory& traj, const CostSpec& cost) {
  check_grid(traj);
  const auto& s0 = traj.states.front();
  cost.validate(s0.followers.size(), s0.dim());
  const std::size_t last = traj.states.size() - 1;
  double state = 0.0;
  if (cost.state_weight != 0.0)
    for (std::size_t n = 0; n <= last; ++n)
      state += trapezoid_weight(n, last, traj.dt) * running_cost(traj.states[n], cost);
  double energy = 0.0;
  const auto& ctrl = traj.control;
  for (std::size_t p = 0; p < ctrl.pieces(); ++p) {
    double sq = 0.0;
    for (double v : ctrl.values()[p].flat()) sq += v * v;
    energy += ctrl.piece_length(p) * sq;
  }
  return state + cost.control_weight * energy;
}

double evaluate_cost(const SwarmState& initial, const ControlSignal& control, const CostSpec& cost,
                     const KernelSet& kernels, double dt) {
  return evaluate_cost(integrate(initial, control, kernels, dt, Integrator::euler), cost);
}

namespace {

// out = D_x f(state, u)^T xi, leaders and followers.
void transpose_jacobian_product(const SwarmState& state, const ControlMatrix& u,
                                const KernelSet& kernels, const AdjointState& xi,
                                AdjointState& out) {
  const std::size_t d = state.dim();
  const std::size_t n = state.followers.size();
  const std::size_t m = state.leaders.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_m = m > 0 ? 1.0 / static_cast<double>(m) : 0.0;
  const bool use_h = !kernels.h.is_zero();
  const bool use_g = m > 0 && !kernels.g_is_zero();
  out.xi_x = Points(n, d);
  out.xi_y = Points(m, d);

  // Follower rows. D_{X_j} f_j = (1/N) sum_{i != j} DH(X_j - X_i) + (1/m) sum_{k,l} u_kl DG^l,
  // D_{X_j} f_i = -(1/N) DH(X_i - X_j); DH is even, so one Jacobian serves both.
#pragma omp parallel for schedule(static)
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> diff(d), jac(d * d), acc(d, 0.0);
    const auto xj = state.followers[j];
    const auto xij = xi.xi_x[j];
    if (use_h) {
      for (std::size_t i = 0; i < n; ++i) {
        if (i == j) continue;
        for (std::size_t c = 0; c < d; ++c) diff[c] = xj[c] - state.followers[i][c];
        jacobian_h(kernels.h, diff, jac);
        const auto xii = xi.xi_x[i];
        for (std::size_t c = 0; c < d; ++c) {
          double s = 0.0;
          for (std::size_t r = 0; r < d; ++r) s += jac[r * d + c] * (xij[r] - xii[r]);
          acc[c] += inv_n * s;
        }
      }
    }
    if (use_g) {
      for (std::size_t l = 0; l < d; ++l) {
        if (kernels.g[l].is_zero()) continue;
        for (std::size_t k = 0; k < m; ++k) {
          const double ukl = u[k][l];
          if (ukl == 0.0) continue;
          for (std::size_t c = 0; c < d; ++c) diff[c] = xj[c] - state.leaders[k][c];
          jacobian_g(kernels.g[l], l, diff, jac);
          for (std::size_t c = 0; c < d; ++c) {
            double s = 0.0;
            for (std::size_t r = 0; r < d; ++r) s += jac[r * d + c] * xij[r];
            acc[c] += inv_m * ukl * s;
          }
        }
      }
    }
    auto o = out.xi_x[j];
    for (std::size_t c = 0; c < d; ++c) o[c] = acc[c];
  }

  // Leader rows: D_{Y_k} f_i = -(1/m) sum_l u_kl DG^l(X_i - Y_k).
  if (use_g) {
    std::vector<double> diff(d), jac(d * d);
    for (std::size_t k = 0; k < m; ++k) {
      auto o = out.xi_y[k];
      for (std::size_t l = 0; l < d; ++l) {
        if (kernels.g[l].is_zero()) continue;
        const double ukl = u[k][l];
        if (ukl == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t c = 0; c < d; ++c) diff[c] = state.followers[i][c] - state.leaders[k][c];
          jacobian_g(kernels.g[l], l, diff, jac);
          const auto xii = xi.xi_x[i];
          for (std::size_t c = 0; c < d; ++c) {
            double s = 0.0;
            for (std::size_t r = 0; r < d; ++r) s += jac[r * d + c] * xii[r];
            o[c] -= inv_m * ukl * s;
          }
        }
      }
    }
  }
}

}  // namespace

AdjointTrajectory solve_adjoint(const Trajectory& traj, const CostSpec& cost,
                                const KernelSet& kernels) {
  check_grid(traj);
  const auto& s0 = traj.states.front();
  const std::size_t d = s0.dim(), n = s0.followers.size(), m = s0.leaders.size();
  cost.validate(n, d);
  const std::size_t last = traj.states.size() - 1;
  const double factor = state_factor(cost, n);

  AdjointTrajectory adj;
  adj.dt = traj.dt;
  adj.states.resize(last + 1);
  adj.states[last] = AdjointState{Points(m, d), Points(n, d), traj.states[last].time};

  AdjointState jt;
  for (std::size_t step = last; step >= 1; --step) {
    const AdjointState& cur = adj.states[step];
    AdjointState prev{cur.xi_y, cur.xi_x, traj.states[step - 1].time};
    if (step < last) {
      const auto& u = traj.control.values()[traj.step_piece[step]];
      transpose_jacobian_product(traj.states[step], u, kernels, cur, jt);
      auto& px = prev.xi_x.flat();
      auto& py = prev.xi_y.flat();
      for (std::size_t q = 0; q < px.size(); ++q) px[q] += traj.dt * jt.xi_x.flat()[q];
      for (std::size_t q = 0; q < py.size(); ++q) py[q] += traj.dt * jt.xi_y.flat()[q];
    }
    if (cost.state_weight != 0.0) {
      const double w = trapezoid_weight(step, last, traj.dt) * factor;
      const auto& x = traj.states[step].followers;
      for (std::size_t i = 0; i < n; ++i) {
        const auto target = cost.target_for(i);
        for (std::size_t c = 0; c < d; ++c) prev.xi_x[i][c] -= w * (x[i][c] - target[c]);
      }
    }
    adj.states[step - 1] = std::move(prev);
  }
  return adj;
}

std::vector<ControlMatrix> control_gradient(const Trajectory& traj, const AdjointTrajectory& adjoint,
                                            const CostSpec& cost, const KernelSet& kernels) {
  check_grid(traj);
  if (adjoint.states.size() != traj.states.size())
    throw InputError("control_gradient: adjoint and trajectory grids differ");
  const auto& ctrl = traj.control;
  const std::size_t d = traj.states.front().dim();
  const std::size_t m = ctrl.leaders();
  const double inv_m = m > 0 ? 1.0 / static_cast<double>(m) : 0.0;
  const bool use_g = m > 0 && !kernels.g_is_zero();

  std::vector<ControlMatrix> grad(ctrl.pieces(), ControlMatrix(m, d));
  std::vector<double> diff(d), gv(d);
  for (std::size_t step = 0; step + 1 < traj.states.size(); ++step) {
    const std::size_t p = traj.step_piece[step];
    const auto& state = traj.states[step];
    const auto& xi = adjoint.states[step];
    const auto& u = ctrl.values()[p];
    auto& gp = grad[p];
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t l = 0; l < d; ++l) {
        double coupling = xi.xi_y[k][l];
        if (use_g && !kernels.g[l].is_zero()) {
          double s = 0.0;
          for (std::size_t i = 0; i < state.followers.size(); ++i) {
            for (std::size_t c = 0; c < d; ++c) diff[c] = state.followers[i][c] - state.leaders[k][c];
            eval_g(kernels.g[l], l, diff, gv);
            for (std::size_t c = 0; c < d; ++c) s += gv[c] * xi.xi_x[i][c];
          }
          coupling += inv_m * s;
        }
        gp[k][l] += traj.dt * (2.0 * cost.control_weight * u[k][l] - coupling);
      }
    }
  }
  for (std::size_t p = 0; p < grad.size(); ++p)
    for (double& v : grad[p].flat()) v /= ctrl.piece_length(p);
  return grad;
}

std::vector<ControlMatrix> cost_gradient(const SwarmState& initial, const ControlSignal& control,
                                         const CostSpec& cost, const KernelSet& kernels, double dt) {
  const auto traj = integrate(initial, control, kernels, dt, Integrator::euler);
  return control_gradient(traj, solve_adjoint(traj, cost, kernels), cost, kernels);
}

double projected_residual(const ControlSignal& control, const std::vector<ControlMatrix>& gradient,
                          double step) {
  double worst = 0.0;
  for (std::size_t p = 0; p < control.pieces(); ++p) {
    ControlMatrix trial = control.values()[p];
    auto& tf = trial.flat();
    for (std::size_t q = 0; q < tf.size(); ++q) tf[q] -= step * gradient[p].flat()[q];
    project_to_admissible(trial, control.u_max());
    double sq = 0.0;
    for (std::size_t q = 0; q < tf.size(); ++q) {
      const double dlt = control.values()[p].flat()[q] - tf[q];
      sq += dlt * dlt;
    }
    worst = std::max(worst, std::sqrt(sq) / step);
  }
  return worst;
}

namespace {

ControlSignal gradient_trial(const ControlSignal& base, const std::vector<ControlMatrix>& grad,
                             double step) {
  ControlSignal trial = base;
  for (std::size_t p = 0; p < trial.pieces(); ++p) {
    auto& v = trial.values()[p].flat();
    for (std::size_t q = 0; q < v.size(); ++q) v[q] -= step * grad[p].flat()[q];
  }
  trial.project();
  return trial;
}

}  // namespace

OptimizeResult optimize(const SwarmState& initial, const ControlSignal& guess, const CostSpec& cost,
                        const KernelSet& kernels, double dt, const OptimizeOptions& opts) {
  if (!(opts.step > 0.0)) throw InputError("optimize: step must be positive");
  if (!(opts.tol > 0.0)) throw InputError("optimize: tol must be positive");
  cost.validate(initial.followers.size(), initial.dim());

  OptimizeResult res;
  res.control = guess;
  res.control.project();
  if (res.control.u_max() == 0.0) {
    // The feasible set is the single point u = 0.
    res.cost = evaluate_cost(initial, res.control, cost, kernels, dt);
    res.cost_history.push_back(res.cost);
    res.converged = true;
    return res;
  }

  auto traj = integrate(initial, res.control, kernels, dt, Integrator::euler);
  res.cost = evaluate_cost(traj, cost);
  res.cost_history.push_back(res.cost);
  auto grad = control_gradient(traj, solve_adjoint(traj, cost, kernels), cost, kernels);

  for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations) {
    res.optimality_residual = projected_residual(res.control, grad, opts.step);
    if (res.optimality_residual <= opts.tol) {
      res.converged = true;
      break;
    }
    double step = opts.step;
    bool accepted = false;
    for (int halving = 0; halving <= 40; ++halving, step *= 0.5) {
      ControlSignal trial = gradient_trial(res.control, grad, step);
      auto trial_traj = integrate(initial, trial, kernels, dt, Integrator::euler);
      const double trial_cost = evaluate_cost(trial_traj, cost);
      if (trial_cost <= res.cost) {
        res.control = std::move(trial);
        res.cost = trial_cost;
        traj = std::move(trial_traj);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no descent within 40 halvings: stationary to rounding
    res.cost_history.push_back(res.cost);
    grad = control_gradient(traj, solve_adjoint(traj, cost, kernels), cost, kernels);
  }
  res.optimality_residual = projected_residual(res.control, grad, opts.step);
  res.converged = res.optimality_residual <= opts.tol;
  return res;
}

double optimality_residual(const SwarmState& initial, const ControlSignal& control,
                           const CostSpec& cost, const KernelSet& kernels, double dt, double step) {
  return projected_residual(control, cost_gradient(initial, control, cost, kernels, dt), step);
}

void write_control_csv(std::ostream& os, const ControlSignal& control) {
  os << "t_start,t_end";
  for (std::size_t k = 0; k < control.leaders(); ++k)
    for (std::size_t l = 0; l < control.dim(); ++l) os << fmt::format(",u_{}_{}", k + 1, l + 1);
  os << '\n';
  for (std::size_t p = 0; p < control.pieces(); ++p) {
    os << fmt::format("{:.17g},{:.17g}", control.breakpoints()[p], control.breakpoints()[p + 1]);
    for (double v : control.values()[p].flat()) os << fmt::format(",{:.17g}", v);
    os << '\n';
  }
}

ControlSignal read_control_csv(std::istream& is, double u_max) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("control csv: missing header");
  std::size_t leaders = 0, dim = 0;
  {
    std::istringstream hs(line);
    std::string field;
    std::size_t col = 0;
    while (std::getline(hs, field, ',')) {
      if (col++ < 2) continue;
      unsigned k = 0, l = 0;
      if (std::sscanf(field.c_str(), "u_%u_%u", &k, &l) != 2)
        throw InputError("control csv: bad header field '" + field + "'");
      leaders = std::max<std::size_t>(leaders, k);
      dim = std::max<std::size_t>(dim, l);
    }
    if (col < 3) throw InputError("control csv: header needs t_start,t_end and u columns");
  }
  std::vector<double> breakpoints;
  std::vector<ControlMatrix> values;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<double> row;
    while (std::getline(ls, field, ',')) {
      try {
        row.push_back(std::stod(field));
      } catch (const std::exception&) {
        throw InputError(fmt::format("control csv line {}: bad number '{}'", lineno, field));
      }
    }
    if (row.size() != 2 + leaders * dim)
      throw InputError(fmt::format("control csv line {}: expected {} fields", lineno, 2 + leaders * dim));
    if (breakpoints.empty()) breakpoints.push_back(row[0]);
    else if (row[0] != breakpoints.back())
      throw InputError(fmt::format("control csv line {}: pieces are not contiguous", lineno));
    breakpoints.push_back(row[1]);
    values.emplace_back(dim, std::vector<double>(row.begin() + 2, row.end()));
  }
  if (values.empty()) throw InputError("control csv: no pieces");
  return ControlSignal(std::move(breakpoints), std::move(values), u_max);
}

void write_optimize_summary(std::ostream& os, const OptimizeResult& result) {
  os << fmt::format("cost={:.17g}\n", result.cost);
  os << fmt::format("iterations={}\n", result.iterations);
  os << fmt::format("optimality_residual={:.17g}\n", result.optimality_residual);
  os << fmt::format("converged={}\n", result.converged ? "true" : "false");
  os << fmt::format("pieces={}\n", result.control.pieces());
}

}  // namespace lf
