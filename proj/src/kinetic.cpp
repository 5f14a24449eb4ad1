#include "lf/kinetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

namespace lf {

void KineticEnsemble::validate() const {
  if (samples.size() < 2) throw InputError("kinetic ensemble: need at least two samples");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("kinetic ensemble: p must lie in [0, 1]");
  if (!all_finite(samples.flat())) throw InputError("kinetic ensemble: non-finite sample");
}

KineticControls KineticControls::constant(double horizon, std::vector<double> u,
                                          std::vector<double> u_star) {
  const std::size_t d = u.size();
  if (u_star.size() != d) throw InputError("kinetic controls: u and u* dimensions differ");
  return {ControlSignal::constant(horizon, Points(d, std::move(u))),
          ControlSignal::constant(horizon, Points(d, std::move(u_star)))};
}

void binary_interaction(std::span<const double> x, std::span<const double> y, bool theta,
                        bool theta_star, std::span<const double> u, std::span<const double> u_star,
                        double alpha, const KernelSet& kernels, std::span<double> out) {
  const std::size_t d = x.size();
  std::vector<double> xi(d), kv(d), bracket(d, 0.0);
  for (std::size_t c = 0; c < d; ++c) xi[c] = x[c] - y[c];
  const double t = theta ? 1.0 : 0.0, ts = theta_star ? 1.0 : 0.0;
  const double free_weight = (1.0 - t) * (1.0 - ts);
  const double led_weight = (1.0 - t) * ts;
  if (free_weight != 0.0 && !kernels.h.is_zero()) {
    eval_h(kernels.h, xi, kv);
    for (std::size_t c = 0; c < d; ++c) bracket[c] += kv[c] * free_weight;
  }
  if (led_weight != 0.0) {
    for (std::size_t l = 0; l < d; ++l) {
      if (kernels.g[l].is_zero()) continue;
      eval_g(kernels.g[l], l, xi, kv);
      for (std::size_t c = 0; c < d; ++c) bracket[c] += kv[c] * u_star[l] * led_weight;
    }
  }
  for (std::size_t c = 0; c < d; ++c) out[c] = x[c] + alpha * (bracket[c] + u[c] * t);
}

std::vector<double> binary_interaction(std::span<const double> x, std::span<const double> y,
                                       bool theta, bool theta_star, std::span<const double> u,
                                       std::span<const double> u_star, double alpha,
                                       const KernelSet& kernels) {
  std::vector<double> out(x.size());
  binary_interaction(x, y, theta, theta_star, u, u_star, alpha, kernels, out);
  return out;
}

std::vector<std::size_t> collision_pairs(std::mt19937_64& eng, std::size_t agents) {
  std::vector<std::size_t> perm(agents);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = agents; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(eng, i)]);
  return perm;
}

KineticEnsemble boltzmann_step(const KineticEnsemble& ens, double eta, double alpha, double dt,
                               const KineticControls& controls, const KernelSet& kernels) {
  ens.validate();
  if (!(eta >= 0.0) || !(dt > 0.0) || !(alpha >= 0.0))
    throw InputError("boltzmann_step: eta, alpha must be >= 0 and dt > 0");
  const double rate = eta * dt;
  if (rate > 1.0 + 1e-12)
    throw ConfigError(fmt::format("boltzmann_step: eta * dt = {} exceeds 1", rate));
  const std::size_t m = ens.samples.size();
  const std::size_t d = ens.samples.dim();

  // All draws of the step come from one stream keyed by the step counter and
  // are consumed serially; the updates below are then embarrassingly parallel.
  auto eng = make_stream(ens.seed, StreamPurpose::collision, ens.step);
  const auto perm = collision_pairs(eng, m);
  const std::size_t pairs = m / 2;
  std::vector<unsigned char> collide(pairs), theta_a(pairs), theta_b(pairs);
  for (std::size_t k = 0; k < pairs; ++k) {
    collide[k] = rate >= 1.0 || uniform01(eng) < rate;
    theta_a[k] = uniform01(eng) < ens.p;
    theta_b[k] = uniform01(eng) < ens.p;
  }

  const auto u = controls.u_at(ens.time);
  const auto u_star = controls.u_star_at(ens.time);
  if (u.size() != d || u_star.size() != d) throw InputError("boltzmann_step: control dimension mismatch");

  KineticEnsemble next = ens;
  const auto count = static_cast<std::ptrdiff_t>(pairs);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t kk = 0; kk < count; ++kk) {
    const auto k = static_cast<std::size_t>(kk);
    if (!collide[k]) continue;
    const std::size_t i = perm[2 * k], j = perm[2 * k + 1];
    binary_interaction(ens.samples[i], ens.samples[j], theta_a[k], theta_b[k], u, u_star, alpha,
                       kernels, next.samples[i]);
    binary_interaction(ens.samples[j], ens.samples[i], theta_b[k], theta_a[k], u, u_star, alpha,
                       kernels, next.samples[j]);
  }
  next.step = ens.step + 1;
  next.time = static_cast<double>(next.step) * dt;
  return next;
}

void limit_kernel(std::span<const double> x, std::span<const double> y, std::span<const double> u_bar,
                  std::span<const double> u_star_bar, double p, const KernelSet& kernels,
                  std::span<double> out) {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("limit_kernel: p must lie in [0, 1]");
  const std::size_t d = x.size();
  std::vector<double> xi(d), h(d, 0.0), g(d, 0.0), kv(d);
  for (std::size_t c = 0; c < d; ++c) xi[c] = x[c] - y[c];
  if (!kernels.h.is_zero()) eval_h(kernels.h, xi, h);
  for (std::size_t l = 0; l < d; ++l) {
    if (kernels.g[l].is_zero()) continue;
    eval_g(kernels.g[l], l, xi, kv);
    for (std::size_t c = 0; c < d; ++c) g[c] += kv[c] * u_star_bar[l];
  }
  const double q = 1.0 - p;
  for (std::size_t c = 0; c < d; ++c) out[c] = q * q * h[c] + p * q * g[c] + p * u_bar[c];
}

std::vector<double> limit_kernel(std::span<const double> x, std::span<const double> y,
                                 std::span<const double> u_bar, std::span<const double> u_star_bar,
                                 double p, const KernelSet& kernels) {
  std::vector<double> out(x.size());
  limit_kernel(x, y, u_bar, u_star_bar, p, kernels, out);
  return out;
}

MeanFieldTrajectory solve_limit_pde(const Points& atoms, double p, const KineticControls& controls,
                                    const KernelSet& kernels, double dt) {
  if (atoms.size() == 0) throw InputError("solve_limit_pde: no atoms");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("solve_limit_pde: p must lie in [0, 1]");
  kernels.validate();
  const std::size_t n = atoms.size(), d = atoms.dim();
  if (kernels.dim() != d) throw InputError("solve_limit_pde: kernel dimension mismatch");
  const auto steps = controls.u.steps_per_piece(dt);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double q = 1.0 - p;
  const bool use_h = !kernels.h.is_zero();
  std::vector<char> use_g(d);
  for (std::size_t l = 0; l < d; ++l) use_g[l] = !kernels.g[l].is_zero();

  MeanFieldTrajectory mf;
  mf.kernels = kernels;
  mf.control = controls.u;
  mf.dt = dt;
  mf.n_particles = n;
  for (std::size_t piece = 0; piece < steps.size(); ++piece)
    mf.step_piece.insert(mf.step_piece.end(), steps[piece], piece);

  Points cur = atoms, next = atoms;
  auto record = [&](double t) {
    mf.times.push_back(t);
    mf.leader_paths.emplace_back(0, d);
    mf.measures.push_back(empirical_from_followers(cur));
    mf.support_bound = std::max(mf.support_bound, support_radius(mf.measures.back()));
  };
  record(0.0);
  for (std::size_t s = 0; s < mf.step_piece.size(); ++s) {
    const double t = static_cast<double>(s) * dt;
    const auto u = controls.u_at(t);
    const auto u_star = controls.u_star_at(t);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      // Radial forms: H(xi) = -xi phi_H(|xi|) and G^l(xi) = e_l phi_l(|xi|), so
      // one norm and one profile per kernel serve every component.
      std::vector<double> xi(d), hacc(d, 0.0), gacc(d, 0.0);
      const auto x = cur[i];
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t c = 0; c < d; ++c) xi[c] = x[c] - cur[j][c];
        const double r = norm(xi);
        if (use_h) {
          const double phi = profile(kernels.h, r);
          for (std::size_t c = 0; c < d; ++c) hacc[c] += -xi[c] * phi;
        }
        for (std::size_t l = 0; l < d; ++l)
          if (use_g[l]) gacc[l] += profile(kernels.g[l], r) * u_star[l];
      }
      auto out = next[i];
      for (std::size_t c = 0; c < d; ++c) {
        const double field = q * q * (inv_n * hacc[c]) + p * q * (inv_n * gacc[c]) + p * u[c];
        out[c] = x[c] + dt * field;
      }
    }
    std::swap(cur, next);
    record(static_cast<double>(s + 1) * dt);
  }
  return mf;
}

namespace {

std::size_t exact_ratio(double a, double b, const char* what) {
  const double r = std::round(a / b);
  if (r < 1.0 || std::abs(r * b - a) > 1e-9 * std::max(1.0, std::abs(a)))
    throw InputError(fmt::format("kinetic sweep: {} ({} / {}) is not an integer", what, a, b));
  return static_cast<std::size_t>(r);
}

}  // namespace

std::vector<KineticSweepRow> quasi_invariant_sweep(const KineticSweep& sweep) {
  if (sweep.eps_list.empty()) throw InputError("kinetic sweep: empty eps list");
  if (sweep.seeds.empty()) throw InputError("kinetic sweep: no seeds");
  for (double e : sweep.eps_list)
    if (!(e > 0.0)) throw InputError("kinetic sweep: eps must be positive");
  const double horizon = sweep.controls.u.horizon();
  for (double e : sweep.eps_list) {
    exact_ratio(horizon, e, "horizon / eps");
    exact_ratio(e, sweep.limit_dt, "eps / limit_dt");
  }

  using clock = std::chrono::steady_clock;
  const std::size_t n_seeds = sweep.seeds.size();
  std::vector<Points> atoms(n_seeds);
  std::vector<MeanFieldTrajectory> limits(n_seeds);
  std::vector<std::exception_ptr> failures(n_seeds * (sweep.eps_list.size() + 1));

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(n_seeds); ++s) try {
    const auto si = static_cast<std::size_t>(s);
    atoms[si] = sweep.sampler.sample(sweep.samples, sweep.seeds[si]);
    limits[si] = solve_limit_pde(atoms[si], sweep.p, sweep.controls, sweep.kernels, sweep.limit_dt);
  } catch (...) {
    failures[static_cast<std::size_t>(s)] = std::current_exception();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  const std::size_t jobs = sweep.eps_list.size() * n_seeds;
  std::vector<KineticSweepRow> rows(jobs);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t jj = 0; jj < static_cast<std::ptrdiff_t>(jobs); ++jj) try {
    const auto job = static_cast<std::size_t>(jj);
    const std::size_t e = job / n_seeds, si = job % n_seeds;
    const double eps = sweep.eps_list[e];
    const auto start = clock::now();
    const std::size_t steps = exact_ratio(horizon, eps, "horizon / eps");
    const std::size_t stride = exact_ratio(eps, sweep.limit_dt, "eps / limit_dt");

    KineticEnsemble ens{atoms[si], sweep.p, sweep.seeds[si], 0, 0.0};
    KineticSweepRow row{eps, sweep.seeds[si], 0.0, 0.0};
    for (std::size_t n = 0; n <= steps; ++n) {
      const auto mc = empirical_from_followers(ens.samples);
      row.max_w1 = std::max(row.max_w1, wasserstein1(mc, limits[si].measures[n * stride]));
      if (n < steps) ens = boltzmann_step(ens, 1.0 / eps, eps, eps, sweep.controls, sweep.kernels);
    }
    if (sweep.measure_time) row.runtime_s = std::chrono::duration<double>(clock::now() - start).count();
    rows[job] = row;
  } catch (...) {
    failures[n_seeds + static_cast<std::size_t>(jj)] = std::current_exception();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  return rows;
}

std::vector<double> sweep_medians(const KineticSweep& sweep, const std::vector<KineticSweepRow>& rows) {
  std::vector<double> medians;
  for (double eps : sweep.eps_list) {
    std::vector<double> v;
    for (const auto& r : rows)
      if (r.eps == eps) v.push_back(r.max_w1);
    if (v.empty()) throw InputError("sweep_medians: no rows for an eps value");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    medians.push_back(v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]));
  }
  return medians;
}

void write_kinetic_csv(std::ostream& os, const std::vector<KineticSweepRow>& rows) {
  os << "eps,seed,max_W1,runtime_s\n";
  for (const auto& r : rows)
    os << fmt::format("{:.17g},{},{:.17g},{:.6g}\n", r.eps, r.seed, r.max_w1, r.runtime_s);
}

}  // namespace lf
