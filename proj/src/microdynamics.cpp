#include "lf/microdynamics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

namespace lf {

void SwarmState::validate() const {
  if (followers.size() < 1) throw InputError("swarm state: need at least one follower");
  if (!leaders.empty() && leaders.dim() != followers.dim()) {
    throw InputError("swarm state: leader and follower dimensions differ");
  }
  if (!all_finite(leaders.flat()) || !all_finite(followers.flat())) {
    throw InputError("swarm state: non-finite coordinate");
  }
}

void project_to_admissible(ControlMatrix& u, double u_max) {
  if (std::isinf(u_max)) return;
  for (std::size_t k = 0; k < u.size(); ++k) {
    auto row = u[k];
    const double len = norm(row);
    if (len > u_max) {
      if (u_max <= 0.0) {
        std::fill(row.begin(), row.end(), 0.0);
      } else {
        double s = u_max / len;
        std::vector<double> orig(row.begin(), row.end());
        for (std::size_t c = 0; c < row.size(); ++c) row[c] = orig[c] * s;
        // Land inside the ball after rounding so that projecting again is a no-op.
        while (norm(row) > u_max) {
          s = std::nextafter(s, 0.0);
          for (std::size_t c = 0; c < row.size(); ++c) row[c] = orig[c] * s;
        }
      }
    }
  }
}

ControlSignal::ControlSignal(std::vector<double> breakpoints, std::vector<ControlMatrix> values,
                             double u_max)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values)), u_max_(u_max) {
  if (breakpoints_.size() < 2 || breakpoints_.size() != values_.size() + 1) {
    throw InputError("control: need pieces + 1 breakpoints");
  }
  if (breakpoints_.front() != 0.0) throw InputError("control: first breakpoint must be 0");
  for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
    if (!(breakpoints_[i] > breakpoints_[i - 1])) {
      throw InputError("control: breakpoints must be strictly increasing");
    }
  }
  if (!(u_max_ >= 0.0)) throw InputError("control: u_max must be >= 0");
  for (const auto& v : values_) {
    if (v.size() != values_.front().size() || v.dim() != values_.front().dim()) {
      throw InputError("control: inconsistent piece shapes");
    }
  }
}

ControlSignal ControlSignal::constant(double horizon, ControlMatrix value, double u_max) {
  return ControlSignal({0.0, horizon}, {std::move(value)}, u_max);
}

ControlSignal ControlSignal::zeros(double horizon, std::size_t pieces, std::size_t leaders,
                                   std::size_t dim, double u_max) {
  if (pieces == 0) throw InputError("control: need at least one piece");
  std::vector<double> bp(pieces + 1);
  for (std::size_t p = 0; p <= pieces; ++p)
    bp[p] = horizon * static_cast<double>(p) / static_cast<double>(pieces);
  bp.back() = horizon;
  return ControlSignal(std::move(bp), std::vector<ControlMatrix>(pieces, Points(leaders, dim)),
                       u_max);
}

std::size_t ControlSignal::piece_index(double t) const {
  const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
  std::size_t p = it == breakpoints_.begin() ? 0 : static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
  return std::min(p, values_.size() - 1);
}

const ControlMatrix& ControlSignal::at(double t) const { return values_[piece_index(t)]; }

void ControlSignal::project() {
  for (auto& v : values_) project_to_admissible(v, u_max_);
}

bool ControlSignal::admissible(double tol) const {
  if (std::isinf(u_max_)) return true;
  for (const auto& v : values_)
    for (std::size_t k = 0; k < v.size(); ++k)
      if (norm(v[k]) > u_max_ * (1.0 + tol) + tol) return false;
  return true;
}

std::vector<std::size_t> ControlSignal::steps_per_piece(double dt) const {
  if (!(dt > 0.0)) throw InputError("dt must be positive");
  std::vector<std::size_t> steps(values_.size());
  for (std::size_t p = 0; p < values_.size(); ++p) {
    const double ratio = piece_length(p) / dt;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
      throw InputError(fmt::format(
          "control breakpoint {} (t={:.17g}) is not aligned with dt={:.17g}", p + 1,
          breakpoints_[p + 1], dt));
    }
    steps[p] = static_cast<std::size_t>(rounded);
  }
  return steps;
}

double ControlSignal::l2_distance(const ControlSignal& other) const {
  if (other.breakpoints_ != breakpoints_) throw InputError("control distance: piece grids differ");
  double s = 0.0;
  for (std::size_t p = 0; p < values_.size(); ++p) {
    double sq = 0.0;
    const auto& a = values_[p].flat();
    const auto& b = other.values_[p].flat();
    for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
    s += piece_length(p) * sq;
  }
  return s;
}

void drift_into(const SwarmState& state, const ControlMatrix& u, const KernelSet& kernels,
                Drift& out) {
  const std::size_t d = state.dim();
  const std::size_t n = state.followers.size();
  const std::size_t m = state.leaders.size();
  if (kernels.dim() != d) throw InputError("drift: kernel dimension mismatch");
  if (u.size() != m || (m > 0 && u.dim() != d)) throw InputError("drift: control shape mismatch");
  const bool use_g = !kernels.g_is_zero();
  if (use_g && m == 0) {
    throw ConfigError("drift: leader kernels are nonzero but there are no leaders");
  }
  if (out.leaders.size() != m || out.leaders.dim() != d) out.leaders = Points(m, d);
  if (out.followers.size() != n || out.followers.dim() != d) out.followers = Points(n, d);

  out.leaders.flat() = u.flat();
  if (m == 0) out.leaders = Points(0, d);

  const bool use_h = !kernels.h.is_zero();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_m = m > 0 ? 1.0 / static_cast<double>(m) : 0.0;

#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> xi(d), kv(d), acc(d, 0.0), accg(d, 0.0);
    const auto xi_pos = state.followers[i];
    if (use_h) {
      for (std::size_t j = 0; j < n; ++j) {
        const auto xj = state.followers[j];
        for (std::size_t c = 0; c < d; ++c) xi[c] = xi_pos[c] - xj[c];
        eval_h(kernels.h, xi, kv);
        for (std::size_t c = 0; c < d; ++c) acc[c] += kv[c];
      }
    }
    if (use_g) {
      for (std::size_t l = 0; l < d; ++l) {
        if (kernels.g[l].is_zero()) continue;
        for (std::size_t k = 0; k < m; ++k) {
          const auto yk = state.leaders[k];
          for (std::size_t c = 0; c < d; ++c) xi[c] = xi_pos[c] - yk[c];
          eval_g(kernels.g[l], l, xi, kv);
          const double ukl = u[k][l];
          for (std::size_t c = 0; c < d; ++c) accg[c] += kv[c] * ukl;
        }
      }
    }
    auto dx = out.followers[i];
    for (std::size_t c = 0; c < d; ++c) dx[c] = inv_n * acc[c] + inv_m * accg[c];
  }
}

Drift drift(const SwarmState& state, const ControlMatrix& u, const KernelSet& kernels) {
  Drift out;
  drift_into(state, u, kernels, out);
  return out;
}

namespace {

void axpy(Points& y, double a, const Points& x) {
  auto& yf = y.flat();
  const auto& xf = x.flat();
  for (std::size_t i = 0; i < yf.size(); ++i) yf[i] += a * xf[i];
}

}  // namespace

Trajectory integrate(const SwarmState& initial, const ControlSignal& control,
                     const KernelSet& kernels, double dt, Integrator method) {
  initial.validate();
  kernels.validate();
  if (control.leaders() != initial.leaders.size()) {
    throw InputError("integrate: control has " + std::to_string(control.leaders()) +
                     " leaders, state has " + std::to_string(initial.leaders.size()));
  }
  const auto steps = control.steps_per_piece(dt);

  Trajectory traj;
  traj.control = control;
  traj.dt = dt;
  traj.method = method;
  for (std::size_t p = 0; p < steps.size(); ++p)
    traj.step_piece.insert(traj.step_piece.end(), steps[p], p);
  const std::size_t total = traj.step_piece.size();
  traj.states.reserve(total + 1);
  SwarmState cur = initial;
  cur.time = 0.0;
  traj.states.push_back(cur);

  Drift k1, k2, k3, k4;
  for (std::size_t n = 0; n < total; ++n) {
    const ControlMatrix& u = control.values()[traj.step_piece[n]];
    SwarmState next = cur;
    drift_into(cur, u, kernels, k1);
    if (method == Integrator::euler) {
      axpy(next.leaders, dt, k1.leaders);
      axpy(next.followers, dt, k1.followers);
    } else {
      SwarmState tmp = cur;
      axpy(tmp.leaders, 0.5 * dt, k1.leaders);
      axpy(tmp.followers, 0.5 * dt, k1.followers);
      drift_into(tmp, u, kernels, k2);
      tmp = cur;
      axpy(tmp.leaders, 0.5 * dt, k2.leaders);
      axpy(tmp.followers, 0.5 * dt, k2.followers);
      drift_into(tmp, u, kernels, k3);
      tmp = cur;
      axpy(tmp.leaders, dt, k3.leaders);
      axpy(tmp.followers, dt, k3.followers);
      drift_into(tmp, u, kernels, k4);
      for (const auto* k : {&k1, &k4}) {
        axpy(next.leaders, dt / 6.0, k->leaders);
        axpy(next.followers, dt / 6.0, k->followers);
      }
      for (const auto* k : {&k2, &k3}) {
        axpy(next.leaders, dt / 3.0, k->leaders);
        axpy(next.followers, dt / 3.0, k->followers);
      }
    }
    next.time = static_cast<double>(n + 1) * dt;
    traj.states.push_back(next);
    cur = std::move(next);
  }
  return traj;
}

double state_norm(const SwarmState& state) {
  if (state.leaders.size() == 0) throw InputError("state_norm: requires at least one leader");
  if (state.followers.size() == 0) throw InputError("state_norm: requires at least one follower");
  double ys = 0.0, xs = 0.0;
  for (std::size_t k = 0; k < state.leaders.size(); ++k) ys += norm(state.leaders[k]);
  for (std::size_t i = 0; i < state.followers.size(); ++i) xs += norm(state.followers[i]);
  return ys / static_cast<double>(state.leaders.size()) +
         xs / static_cast<double>(state.followers.size());
}

double state_distance(const SwarmState& a, const SwarmState& b) {
  if (a.leaders.size() != b.leaders.size() || a.followers.size() != b.followers.size()) {
    throw InputError("state_distance: shape mismatch");
  }
  if (a.leaders.size() == 0) throw InputError("state_distance: requires at least one leader");
  double ys = 0.0, xs = 0.0;
  for (std::size_t k = 0; k < a.leaders.size(); ++k) ys += distance(a.leaders[k], b.leaders[k]);
  for (std::size_t i = 0; i < a.followers.size(); ++i)
    xs += distance(a.followers[i], b.followers[i]);
  return ys / static_cast<double>(a.leaders.size()) +
         xs / static_cast<double>(a.followers.size());
}

AprioriReport check_apriori_bounds(const Trajectory& traj, double c_tilde) {
  if (traj.states.empty()) throw InputError("check_apriori_bounds: empty trajectory");
  AprioriReport rep;
  const double horizon = traj.states.back().time;
  rep.growth_bound =
      (state_norm(traj.states.front()) + c_tilde * horizon) * std::exp(c_tilde * horizon);
  for (const auto& s : traj.states) rep.max_norm = std::max(rep.max_norm, state_norm(s));
  for (std::size_t n = 1; n < traj.states.size(); ++n) {
    const double gap = traj.states[n].time - traj.states[n - 1].time;
    rep.lipschitz_constant =
        std::max(rep.lipschitz_constant, state_distance(traj.states[n], traj.states[n - 1]) / gap);
  }
  rep.growth_ok = rep.max_norm <= rep.growth_bound;
  return rep;
}

double apriori_constant(const KernelSet& kernels, double u_max) {
  double cg = 0.0;
  for (const auto& g : kernels.g) cg = std::max(cg, g.growth_constant());
  const double d = static_cast<double>(kernels.dim());
  return u_max + 2.0 * kernels.h.growth_constant() + d * cg * u_max;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, std::size_t stride) {
  if (traj.states.empty()) return;
  if (stride == 0) stride = 1;
  const auto& s0 = traj.states.front();
  const std::size_t d = s0.dim();
  os << "t";
  for (std::size_t k = 0; k < s0.leaders.size(); ++k)
    for (std::size_t c = 0; c < d; ++c) os << fmt::format(",Y_{}_{}", k + 1, c + 1);
  for (std::size_t i = 0; i < s0.followers.size(); ++i)
    for (std::size_t c = 0; c < d; ++c) os << fmt::format(",X_{}_{}", i + 1, c + 1);
  os << '\n';
  const std::size_t last = traj.states.size() - 1;
  for (std::size_t n = 0; n <= last; ++n) {
    if (n % stride != 0 && n != last) continue;
    const auto& s = traj.states[n];
    os << fmt::format("{:.17g}", s.time);
    for (double v : s.leaders.flat()) os << fmt::format(",{:.17g}", v);
    for (double v : s.followers.flat()) os << fmt::format(",{:.17g}", v);
    os << '\n';
  }
}

}  // namespace lf
