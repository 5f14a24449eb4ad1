#include "lf/meanfield.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numbers>
#include <ostream>

#include <fmt/format.h>

#include "lf/rng.hpp"

namespace lf {

namespace {

constexpr std::uint64_t kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                                     41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};

double radical_inverse(std::uint64_t index, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

double max_leader_norm(const Points& leaders) {
  double r = 0.0;
  for (std::size_t k = 0; k < leaders.size(); ++k) r = std::max(r, norm(leaders[k]));
  return r;
}

double mean_leader_gap(const Points& a, const Points& b) {
  if (a.size() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += distance(a[k], b[k]);
  return s / static_cast<double>(a.size());
}

}  // namespace

Points InitialSampler::sample(std::size_t count, std::uint64_t seed) const {
  const std::size_t d = dim();
  if (d == 0) throw InputError("sampler: center must have at least one coordinate");
  if (count == 0) throw InputError("sampler: empty sample requested");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InputError("sampler: scale must be positive");
  Points out(count, d);
  auto eng = make_stream(seed, StreamPurpose::initial_sample);
  switch (kind) {
    case Kind::uniform_box:
      for (std::size_t i = 0; i < count; ++i)
        for (std::size_t c = 0; c < d; ++c) out[i][c] = center[c] + uniform(eng, -scale, scale);
      break;
    case Kind::gaussian:
      for (std::size_t i = 0; i < count; ++i)
        for (std::size_t c = 0; c < d; ++c) out[i][c] = center[c] + scale * standard_normal(eng);
      break;
    case Kind::halton_box: {
      if (d > std::size(kPrimes)) throw InputError("sampler: halton supports at most 24 dimensions");
      // Random shift modulo 1 per coordinate; index-based, hence nested.
      std::vector<double> shift(d);
      for (auto& s : shift) s = uniform01(eng);
      for (std::size_t i = 0; i < count; ++i)
        for (std::size_t c = 0; c < d; ++c) {
          double v = radical_inverse(i + 1, kPrimes[c]) + shift[c];
          v -= std::floor(v);
          out[i][c] = center[c] + scale * (2.0 * v - 1.0);
        }
      break;
    }
  }
  return out;
}

MeanFieldTrajectory to_meanfield(const Trajectory& traj, const KernelSet& kernels) {
  MeanFieldTrajectory mf;
  mf.kernels = kernels;
  mf.control = traj.control;
  mf.dt = traj.dt;
  mf.step_piece = traj.step_piece;
  mf.n_particles = traj.states.empty() ? 0 : traj.states.front().followers.size();
  mf.times.reserve(traj.states.size());
  mf.leader_paths.reserve(traj.states.size());
  mf.measures.reserve(traj.states.size());
  for (const auto& s : traj.states) {
    mf.times.push_back(s.time);
    mf.leader_paths.push_back(s.leaders);
    mf.measures.push_back(empirical_from_followers(s.followers));
    mf.support_bound = std::max(mf.support_bound, support_radius(mf.measures.back()));
  }
  return mf;
}

MeanFieldTrajectory solve_meanfield(const WeightedMeasure& mu0, const Points& leaders0,
                                    const ControlSignal& control, const KernelSet& kernels,
                                    double dt, Integrator method) {
  mu0.validate();
  if (mu0.size() == 0) throw InputError("solve_meanfield: empty initial measure");
  if (mu0.kind != MeasureKind::probability)
    throw InputError("solve_meanfield: initial datum must be a probability measure");
  if (!mu0.uniform_weights())
    throw InputError("solve_meanfield: particle solver requires uniform initial weights");
  SwarmState s0{leaders0, mu0.atoms, 0.0};
  return to_meanfield(integrate(s0, control, kernels, dt, method), kernels);
}

MeanFieldTrajectory solve_meanfield(const InitialSampler& sampler, std::uint64_t seed,
                                    std::size_t n_particles, const Points& leaders0,
                                    const ControlSignal& control, const KernelSet& kernels,
                                    double dt, Integrator method) {
  if (n_particles < 1) throw InputError("solve_meanfield: need at least one particle");
  return solve_meanfield(empirical_from_followers(sampler.sample(n_particles, seed)), leaders0,
                         control, kernels, dt, method);
}

double BumpFunction::value(std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t c = 0; c < x.size(); ++c) s += (x[c] - center[c]) * (x[c] - center[c]);
  s /= radius * radius;
  return s < 1.0 ? std::exp(1.0 / (s - 1.0)) : 0.0;
}

void BumpFunction::gradient(std::span<const double> x, std::span<double> out) const {
  double s = 0.0;
  for (std::size_t c = 0; c < x.size(); ++c) s += (x[c] - center[c]) * (x[c] - center[c]);
  s /= radius * radius;
  if (s >= 1.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double phi = std::exp(1.0 / (s - 1.0));
  const double f = -phi * 2.0 / (radius * radius * (s - 1.0) * (s - 1.0));
  for (std::size_t c = 0; c < x.size(); ++c) out[c] = f * (x[c] - center[c]);
}

namespace {

// <grad phi . v, mu> at grid index n, visiting only atoms inside the bump.
double weak_rhs(const MeanFieldTrajectory& traj, const BumpFunction& phi, std::size_t n,
                const ControlMatrix& u) {
  const auto& mu = traj.measures[n];
  const auto& leaders = traj.leader_paths[n];
  const auto& kernels = traj.kernels;
  const std::size_t d = mu.dim();
  const std::size_t m = leaders.size();
  const bool use_g = m > 0 && !kernels.g_is_zero();
  const double inv_m = m > 0 ? 1.0 / static_cast<double>(m) : 0.0;
  std::vector<double> grad(d), v(d), xi(d), kv(d);
  double total = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto x = mu.atoms[i];
    phi.gradient(x, grad);
    if (std::all_of(grad.begin(), grad.end(), [](double g) { return g == 0.0; })) continue;
    std::fill(v.begin(), v.end(), 0.0);
    if (!kernels.h.is_zero()) {
      for (std::size_t j = 0; j < mu.size(); ++j) {
        for (std::size_t c = 0; c < d; ++c) xi[c] = x[c] - mu.atoms[j][c];
        eval_h(kernels.h, xi, kv);
        for (std::size_t c = 0; c < d; ++c) v[c] += mu.weights[j] * kv[c];
      }
    }
    if (use_g) {
      for (std::size_t l = 0; l < d; ++l) {
        if (kernels.g[l].is_zero()) continue;
        for (std::size_t k = 0; k < m; ++k) {
          for (std::size_t c = 0; c < d; ++c) xi[c] = x[c] - leaders[k][c];
          eval_g(kernels.g[l], l, xi, kv);
          for (std::size_t c = 0; c < d; ++c) v[c] += inv_m * u[k][l] * kv[c];
        }
      }
    }
    double dot = 0.0;
    for (std::size_t c = 0; c < d; ++c) dot += grad[c] * v[c];
    total += mu.weights[i] * dot;
  }
  return total;
}

double pairing(const BumpFunction& phi, const WeightedMeasure& mu) {
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) s += mu.weights[i] * phi.value(mu.atoms[i]);
  return s;
}

}  // namespace

double weak_residual(const MeanFieldTrajectory& traj, const BumpFunction& phi, double t0,
                     double t1) {
  if (traj.times.empty()) return 0.0;
  const std::size_t last = traj.times.size() - 1;
  auto snap = [&](double t) {
    const double idx = std::round(t / traj.dt);
    return static_cast<std::size_t>(std::clamp(idx, 0.0, static_cast<double>(last)));
  };
  std::size_t a = snap(t0), b = snap(t1);
  if (a > b) std::swap(a, b);
  auto control_at = [&](std::size_t n) -> const ControlMatrix& {
    const std::size_t p = n < traj.step_piece.size() ? traj.step_piece[n] : traj.step_piece.back();
    return traj.control.values()[p];
  };
  double integral = 0.0;
  if (b > a) {
    double prev = weak_rhs(traj, phi, a, control_at(a));
    for (std::size_t n = a + 1; n <= b; ++n) {
      // Right endpoint uses the control of the step that arrives there.
      const double cur = weak_rhs(traj, phi, n, control_at(n - 1));
      integral += 0.5 * traj.dt * (prev + cur);
      prev = n < b ? weak_rhs(traj, phi, n, control_at(n)) : 0.0;
    }
  }
  return std::abs(pairing(phi, traj.measures[b]) - pairing(phi, traj.measures[a]) - integral);
}

StabilityReport stability_experiment(const MeanFieldProblem& base, const Perturbation& perturbation,
                                     std::uint64_t seed) {
  if (perturbation.leader_shift == 0.0 && perturbation.atom_jitter == 0.0) {
    throw InputError("stability_experiment: zero perturbation (chi-distance at t=0 vanishes)");
  }
  if (base.initial_atoms.size() == 0) throw InputError("stability_experiment: no atoms");
  const std::size_t d = base.initial_atoms.dim();

  auto eng = make_stream(seed, StreamPurpose::perturbation);
  std::vector<double> dir(d);
  double len = 0.0;
  while (len == 0.0) {
    for (auto& x : dir) x = standard_normal(eng);
    len = norm(dir);
  }
  for (auto& x : dir) x /= len;
  const double phase = 2.0 * std::numbers::pi * uniform01(eng);

  Points leaders_b = base.leaders0;
  for (std::size_t k = 0; k < leaders_b.size(); ++k)
    for (std::size_t c = 0; c < d; ++c) leaders_b[k][c] += perturbation.leader_shift * dir[c];
  Points atoms_b = base.initial_atoms;
  for (std::size_t i = 0; i < atoms_b.size(); ++i) {
    double proj = 0.0;
    for (std::size_t c = 0; c < d; ++c) proj += atoms_b[i][c] * dir[c];
    const double shift = perturbation.atom_jitter * (1.0 + 0.5 * std::sin(proj + phase));
    for (std::size_t c = 0; c < d; ++c) atoms_b[i][c] += shift * dir[c];
  }

  const auto run_a = solve_meanfield(empirical_from_followers(base.initial_atoms), base.leaders0,
                                     base.control, base.kernels, base.dt, base.method);
  const auto run_b = solve_meanfield(empirical_from_followers(atoms_b), leaders_b, base.control,
                                     base.kernels, base.dt, base.method);

  StabilityReport rep;
  rep.chi.resize(run_a.times.size());
  for (std::size_t n = 0; n < run_a.times.size(); ++n) {
    rep.chi[n] = chi_distance(run_a.leader_paths[n], run_a.measures[n], run_b.leader_paths[n],
                              run_b.measures[n]);
  }
  rep.chi_initial = rep.chi.front();
  if (rep.chi_initial == 0.0)
    throw InputError("stability_experiment: degenerate perturbation (chi-distance at t=0 is 0)");
  rep.chi_max = *std::max_element(rep.chi.begin(), rep.chi.end());
  rep.ratio = rep.chi_max / rep.chi_initial;

  // Gronwall constant from sampled Lipschitz certificates on the ball that
  // contains every pairwise difference of the two runs.
  double reach = std::max(run_a.support_bound, run_b.support_bound);
  for (const auto* run : {&run_a, &run_b})
    for (const auto& y : run->leader_paths) reach = std::max(reach, max_leader_norm(y));
  const double radius = std::max(2.0 * reach, 1.0);
  const double lip_h =
      certify_growth(base.kernels.h, KernelRole::follower, radius, 20000, seed).lipschitz_estimate;
  double lip_g = 0.0;
  for (const auto& g : base.kernels.g)
    lip_g = std::max(lip_g,
                     certify_growth(g, KernelRole::leader, radius, 20000, seed).lipschitz_estimate);
  double u_peak = 0.0;
  for (const auto& u : base.control.values()) u_peak = std::max(u_peak, max_leader_norm(u));
  rep.c_tilde = 2.0 * lip_h + static_cast<double>(d) * lip_g * u_peak;
  rep.bound = std::exp(rep.c_tilde * base.control.horizon());
  return rep;
}

std::vector<ConvergenceRow> convergence_study(const ConvergenceStudy& study) {
  if (study.n_list.empty()) throw InputError("convergence_study: empty N list");
  for (std::size_t i = 1; i < study.n_list.size(); ++i)
    if (study.n_list[i] <= study.n_list[i - 1])
      throw InputError("convergence_study: N list must be strictly increasing");
  if (study.reference_n <= study.n_list.back())
    throw InputError("convergence_study: reference N must exceed every N in the list");

  using clock = std::chrono::steady_clock;
  const Points reference_cloud = study.sampler.sample(study.reference_n, study.seed);
  const auto reference =
      solve_meanfield(empirical_from_followers(reference_cloud), study.leaders0,
                      study.reference_control, study.kernels, study.dt);

  std::vector<ConvergenceRow> rows(study.n_list.size());
  std::vector<std::exception_ptr> failures(study.n_list.size());
  const auto count = static_cast<std::ptrdiff_t>(study.n_list.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t r = 0; r < count; ++r) try {
    const std::size_t n = study.n_list[static_cast<std::size_t>(r)];
    const auto start = clock::now();
    const ControlSignal control =
        study.control_for ? study.control_for(n) : study.reference_control;
    const auto run = solve_meanfield(empirical_from_followers(reference_cloud.head(n)),
                                     study.leaders0, control, study.kernels, study.dt);
    if (run.times.size() != reference.times.size())
      throw InputError("convergence_study: time grids differ between runs");
    ConvergenceRow row;
    row.n = n;
    for (std::size_t t = 0; t < run.times.size(); ++t) {
      row.max_w1 = std::max(row.max_w1, wasserstein1(run.measures[t], reference.measures[t]));
      row.max_leader_err = std::max(
          row.max_leader_err, mean_leader_gap(run.leader_paths[t], reference.leader_paths[t]));
    }
    if (study.measure_time)
      row.runtime_s = std::chrono::duration<double>(clock::now() - start).count();
    rows[static_cast<std::size_t>(r)] = row;
  } catch (...) {
    failures[static_cast<std::size_t>(r)] = std::current_exception();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  return rows;
}

void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  os << "N,max_W1,max_leader_err,runtime_s\n";
  for (const auto& r : rows)
    os << fmt::format("{},{:.17g},{:.17g},{:.6g}\n", r.n, r.max_w1, r.max_leader_err, r.runtime_s);
}

}  // namespace lf
