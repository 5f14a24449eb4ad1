#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <Eigen/Core>
#include <fmt/format.h>

#include "lf/cli.hpp"

namespace lf::cli {

namespace {

constexpr const char* version = "0.1.0";

struct Artifacts {
  std::vector<std::pair<std::string, std::string>> files;  // name, content
  std::string primary;                                     // CSV compared by --check
  int status = ExitCode::ok;

  void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
};

template <class F>
std::string render(F&& write) {
  std::ostringstream os;
  write(os);
  return os.str();
}

double max_control_norm(const ControlSignal& control) {
  double out = 0.0;
  for (const auto& v : control.values())
    for (std::size_t k = 0; k < v.size(); ++k) out = std::max(out, norm(v[k]));
  return out;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

SwarmState initial_state(const ExperimentConfig& c) {
  return SwarmState{c.leaders0, c.sampler.sample(c.followers, c.seed), 0.0};
}

Artifacts run_simulate(const ExperimentConfig& c, std::ostream& log) {
  const auto s0 = initial_state(c);
  const auto traj = integrate(s0, c.control, c.kernels, c.dt, c.integrator);
  const double u_bound = std::isfinite(c.u_max) ? c.u_max : max_control_norm(c.control);
  const auto report = check_apriori_bounds(traj, apriori_constant(c.kernels, u_bound));

  Artifacts a;
  a.primary = "trajectory.csv";
  a.add("trajectory.csv", render([&](std::ostream& os) { write_trajectory_csv(os, traj, c.stride); }));
  a.add("summary.txt", fmt::format("steps={}\nfinal_time={:.17g}\ngrowth_ok={}\ngrowth_bound={:.17g}\n"
                                   "max_norm={:.17g}\nlipschitz_constant={:.17g}\n",
                                   traj.states.size() - 1, traj.states.back().time, report.growth_ok,
                                   report.growth_bound, report.max_norm, report.lipschitz_constant));
  log << fmt::format("simulate: {} steps, max norm {:.6g}, growth bound {:.6g} ({})\n",
                     traj.states.size() - 1, report.max_norm, report.growth_bound,
                     report.growth_ok ? "ok" : "violated");
  if (c.plots) {
    std::vector<PlotSeries> series;
    for (std::size_t k = 0; k < std::min<std::size_t>(s0.leaders.size(), 4); ++k) {
      PlotSeries s{fmt::format("leader {}", k + 1), {}, {}};
      for (const auto& st : traj.states) {
        s.x.push_back(st.time);
        s.y.push_back(st.leaders[k][0]);
      }
      series.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < std::min<std::size_t>(s0.followers.size(), 4); ++i) {
      PlotSeries s{fmt::format("follower {}", i + 1), {}, {}};
      for (const auto& st : traj.states) {
        s.x.push_back(st.time);
        s.y.push_back(st.followers[i][0]);
      }
      series.push_back(std::move(s));
    }
    a.add("trajectory.svg", svg_line_plot("Trajectories (first coordinate)", "t", "x_1", series));
  }
  return a;
}

Artifacts run_meanfield_converge(const ExperimentConfig& c, std::ostream& log) {
  require(!c.n_list.empty(), "study.n_list is required for meanfield-converge");
  require(c.reference_n > c.n_list.back(), "study.reference_n must exceed every entry of study.n_list");
  ConvergenceStudy study;
  study.sampler = c.sampler;
  study.seed = c.seed;
  study.leaders0 = c.leaders0;
  study.kernels = c.kernels;
  study.dt = c.dt;
  study.n_list = c.n_list;
  study.reference_n = c.reference_n;
  study.reference_control = c.control;
  study.measure_time = c.timing;
  const auto rows = convergence_study(study);

  Artifacts a;
  a.primary = "convergence.csv";
  a.add("convergence.csv", render([&](std::ostream& os) { write_convergence_csv(os, rows); }));
  for (const auto& r : rows) log << fmt::format("N = {:6}  max W1 = {:.6e}\n", r.n, r.max_w1);
  log << fmt::format("final/first = {:.4f}\n", rows.back().max_w1 / rows.front().max_w1);
  if (c.plots) {
    PlotSeries s{"max_t W1", {}, {}};
    for (const auto& r : rows) {
      s.x.push_back(static_cast<double>(r.n));
      s.y.push_back(r.max_w1);
    }
    a.add("convergence.svg", svg_line_plot(fmt::format("Mean-field convergence (N_ref = {})", c.reference_n),
                                           "N", "max_t W1", {s}, true, true));
  }
  return a;
}

Artifacts run_stability(const ExperimentConfig& c, std::ostream& log) {
  require(!c.delta_list.empty(), "study.delta_list is required for stability");
  MeanFieldProblem base{c.sampler.sample(c.followers, c.seed), c.leaders0, c.control, c.kernels, c.dt,
                        c.integrator};
  Artifacts a;
  a.primary = "stability.csv";
  std::string csv = "delta,chi_initial,chi_max,ratio,c_tilde,bound\n";
  std::vector<PlotSeries> series;
  for (double delta : c.delta_list) {
    const auto rep = stability_experiment(base, Perturbation{delta, delta}, c.seed);
    csv += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", delta, rep.chi_initial,
                       rep.chi_max, rep.ratio, rep.c_tilde, rep.bound);
    log << fmt::format("delta = {:g}: ratio {:.6f}, bound {:.6g} ({})\n", delta, rep.ratio, rep.bound,
                       rep.ratio <= rep.bound ? "ok" : "violated");
    PlotSeries s{fmt::format("delta = {:g}", delta), {}, {}};
    for (std::size_t n = 0; n < rep.chi.size(); ++n) {
      s.x.push_back(static_cast<double>(n) * c.dt);
      s.y.push_back(rep.chi[n] / rep.chi_initial);
    }
    series.push_back(std::move(s));
  }
  a.add("stability.csv", csv);
  if (c.plots) a.add("stability.svg", svg_line_plot("Perturbation growth", "t", "chi(t) / chi(0)", series));
  return a;
}

Artifacts run_optimize(const ExperimentConfig& c, std::ostream& log) {
  const auto s0 = initial_state(c);
  CostSpec cost{c.target, c.gamma, c.state_weight, c.scale};
  const auto res = optimize(s0, c.control, cost, c.kernels, c.dt, c.optimizer);
  Artifacts a;
  a.primary = "control.csv";
  a.add("control.csv", render([&](std::ostream& os) { write_control_csv(os, res.control); }));
  a.add("optimize_summary.txt", render([&](std::ostream& os) { write_optimize_summary(os, res); }));
  std::string hist = "iteration,cost\n";
  for (std::size_t k = 0; k < res.cost_history.size(); ++k)
    hist += fmt::format("{},{:.17g}\n", k, res.cost_history[k]);
  a.add("cost_history.csv", hist);
  log << fmt::format("optimize: cost {:.10g} after {} iterations, residual {:.3e} ({})\n", res.cost,
                     res.iterations, res.optimality_residual, res.converged ? "converged" : "not converged");
  if (c.plots) {
    PlotSeries s{"J", {}, res.cost_history};
    for (std::size_t k = 0; k < res.cost_history.size(); ++k) s.x.push_back(static_cast<double>(k));
    a.add("cost_history.svg", svg_line_plot("Cost vs iteration", "iteration", "J", {s}));
  }
  return a;
}

Artifacts run_gamma_sweep(const ExperimentConfig& c, std::ostream& log) {
  require(!c.n_list.empty(), "study.n_list is required for gamma-sweep");
  require(c.target.size() == 1, "gamma-sweep needs a single shared cost.target point");
  GammaProblem g;
  g.sampler = c.sampler;
  g.seed = c.seed;
  g.leaders0 = c.leaders0;
  g.kernels = c.kernels;
  g.target = c.target;
  g.control_weight = c.gamma;
  g.dt = c.dt;
  g.guess = c.control;
  g.options = c.optimizer;
  g.n_list = c.n_list;
  g.reference_n = c.reference_n;
  const auto rep = gamma_sweep(g);

  Artifacts a;
  a.primary = "gamma.csv";
  a.add("gamma.csv", render([&](std::ostream& os) { write_gamma_csv(os, rep); }));
  a.add("reference_control.csv", render([&](std::ostream& os) { write_control_csv(os, rep.reference.control); }));
  log << fmt::format("reference N = {}: J = {:.10g}\n", c.reference_n, rep.reference.cost);
  PlotSeries gap{"|J_N - J_ref|", {}, {}}, ctrl{"control L2 gap", {}, {}};
  for (const auto& r : rep.rows) {
    log << fmt::format("N = {:6}  J = {:.10g}  gap = {:.4e}  residual = {:.3e}\n", r.n, r.optimal_cost,
                       r.control_gap, r.residual);
    gap.x.push_back(static_cast<double>(r.n));
    gap.y.push_back(std::abs(r.optimal_cost - rep.reference.cost));
    ctrl.x.push_back(static_cast<double>(r.n));
    ctrl.y.push_back(r.control_gap);
  }
  if (c.plots) a.add("gamma.svg", svg_line_plot("Finite-N optimal controls", "N", "error", {gap, ctrl}, true, true));
  return a;
}

Artifacts run_kinetic_sweep(const ExperimentConfig& c, std::ostream& log) {
  require(!c.eps_list.empty(), "study.eps_list is required for kinetic-sweep");
  KineticSweep s;
  s.eps_list = c.eps_list;
  s.samples = c.samples;
  s.p = c.p;
  s.controls = KineticControls::constant(c.horizon, c.u_bar, c.u_star);
  s.kernels = c.kernels;
  s.sampler = c.sampler;
  s.seeds = c.seeds;
  s.limit_dt = c.limit_dt;
  s.measure_time = c.timing;
  const auto rows = quasi_invariant_sweep(s);
  const auto med = sweep_medians(s, rows);

  Artifacts a;
  a.primary = "kinetic.csv";
  a.add("kinetic.csv", render([&](std::ostream& os) { write_kinetic_csv(os, rows); }));
  std::string mcsv = "eps,median_max_W1\n";
  PlotSeries series{"median max_t W1", {}, {}};
  for (std::size_t k = 0; k < med.size(); ++k) {
    mcsv += fmt::format("{:.17g},{:.17g}\n", c.eps_list[k], med[k]);
    log << fmt::format("eps = {:g}  median max W1 = {:.6e}\n", c.eps_list[k], med[k]);
    series.x.push_back(c.eps_list[k]);
    series.y.push_back(med[k]);
  }
  a.add("kinetic_medians.csv", mcsv);
  if (c.plots) a.add("kinetic.svg", svg_line_plot("Quasi-invariant limit", "eps", "W1", {series}, true, true));
  return a;
}

Artifacts run_feedback(const ExperimentConfig& c, std::ostream& log) {
  require(c.target.size() == 1, "feedback-control needs a single shared cost.target point");
  InstantaneousProblem prob;
  prob.target = {c.target[0].begin(), c.target[0].end()};
  prob.gamma = c.gamma;
  prob.beta = InstantaneousProblem::beta_from_rate(c.lambda, c.dt);
  prob.dt = c.dt;
  prob.p = c.p;
  prob.u_max = c.u_max;
  const KineticEnsemble ens{c.sampler.sample(c.followers, c.seed), c.p, c.seed, 0, 0.0};
  const auto ctrl = feedback_boltzmann_run(ens, prob, c.kernels, c.horizon);
  const auto free = feedback_boltzmann_run(ens, prob, c.kernels, c.horizon, false);

  Artifacts a;
  a.primary = "feedback.csv";
  a.add("feedback.csv", render([&](std::ostream& os) { write_feedback_csv(os, ctrl); }));
  a.add("feedback_free.csv", render([&](std::ostream& os) { write_feedback_csv(os, free); }));
  a.add("feedback_summary.txt",
        fmt::format("realized_cost={:.17g}\ndiscounted_state_cost={:.17g}\nfree_discounted_state_cost={:.17g}\n"
                    "state_cost_ratio={:.17g}\ncontrol_energy={:.17g}\n",
                    ctrl.realized_cost, ctrl.discounted_state_cost, free.discounted_state_cost,
                    ctrl.discounted_state_cost / free.discounted_state_cost, ctrl.control_energy));
  log << fmt::format("feedback: discounted state cost {:.6g} vs {:.6g} uncontrolled (ratio {:.4f})\n",
                     ctrl.discounted_state_cost, free.discounted_state_cost,
                     ctrl.discounted_state_cost / free.discounted_state_cost);
  if (!c.gamma_list.empty()) {
    std::string csv = "gamma,realized_cost,discounted_state_cost,control_energy\n";
    for (double g : c.gamma_list) {
      auto pg = prob;
      pg.gamma = g;
      const auto run = feedback_boltzmann_run(ens, pg, c.kernels, c.horizon);
      csv += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", g, run.realized_cost,
                         run.discounted_state_cost, run.control_energy);
      log << fmt::format("gamma = {:g}: control energy {:.6e}\n", g, run.control_energy);
    }
    a.add("feedback_gamma.csv", csv);
  }
  if (c.plots) {
    PlotSeries sc{"feedback", {}, {}}, sf{"no control", {}, {}};
    for (const auto& r : ctrl.steps) {
      sc.x.push_back(r.time);
      sc.y.push_back(r.state_cost);
    }
    for (const auto& r : free.steps) {
      sf.x.push_back(r.time);
      sf.y.push_back(r.state_cost);
    }
    a.add("feedback.svg", svg_line_plot("Tracking error", "t", "mean |X - x_i|^2", {sc, sf}));
  }
  return a;
}

Artifacts run_certify(const ExperimentConfig& c, std::ostream& log) {
  struct Item {
    std::string name;
    KernelSpec spec;
    KernelRole role;
  };
  std::vector<Item> items{{"h", c.kernels.h, KernelRole::follower}};
  for (std::size_t l = 0; l < c.kernels.g.size(); ++l)
    items.push_back({fmt::format("g{}", l + 1), c.kernels.g[l], KernelRole::leader});
  if (c.catalog)
    for (auto kind : {KernelKind::zero, KernelKind::constant, KernelKind::attraction_repulsion,
                      KernelKind::stokes_like})
      for (auto role : {KernelRole::follower, KernelRole::leader}) {
        KernelSpec spec{kind, kind == KernelKind::zero ? std::vector<double>{} : std::vector<double>{1.0},
                        c.dim, nullptr};
        items.push_back({fmt::format("catalog:{}", to_string(kind)), spec, role});
      }

  Artifacts a;
  a.primary = "certificates.csv";
  std::string csv = "kernel,role,kind,constant,max_ratio,lipschitz,samples,radius,pass\n";
  bool all = true;
  for (const auto& it : items) {
    const auto cert = certify_growth(it.spec, it.role, c.certify_radius, c.certify_samples, c.seed);
    all = all && cert.pass;
    const char* role = it.role == KernelRole::follower ? "follower" : "leader";
    csv += fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{},{:.17g},{}\n", it.name, role,
                       to_string(it.spec.kind), cert.constant, cert.max_ratio, cert.lipschitz_estimate,
                       cert.n_samples, cert.radius, cert.pass ? "yes" : "no");
    log << fmt::format("{:28} {:8} C = {:.4g}  max ratio = {:.4g}  L = {:.4g}  {}\n", it.name, role,
                       cert.constant, cert.max_ratio, cert.lipschitz_estimate, cert.pass ? "pass" : "FAIL");
  }
  a.add("certificates.csv", csv);
  if (!all) a.status = ExitCode::numerical_error;
  return a;
}

std::string compiler_id() {
#if defined(__clang__)
  return fmt::format("clang {}.{}.{}", __clang_major__, __clang_minor__, __clang_patchlevel__);
#elif defined(__GNUC__)
  return fmt::format("gcc {}.{}.{}", __GNUC__, __GNUC_MINOR__, __GNUC_PATCHLEVEL__);
#else
  return "unknown";
#endif
}

}  // namespace

std::optional<Subcommand> parse_subcommand(const std::string& name) {
  for (auto s : {Subcommand::simulate, Subcommand::meanfield_converge, Subcommand::stability,
                 Subcommand::optimize, Subcommand::gamma_sweep, Subcommand::kinetic_sweep,
                 Subcommand::feedback_control, Subcommand::certify_kernels, Subcommand::validate})
    if (to_string(s) == name) return s;
  return std::nullopt;
}

std::string to_string(Subcommand s) {
  switch (s) {
    case Subcommand::simulate: return "simulate";
    case Subcommand::meanfield_converge: return "meanfield-converge";
    case Subcommand::stability: return "stability";
    case Subcommand::optimize: return "optimize";
    case Subcommand::gamma_sweep: return "gamma-sweep";
    case Subcommand::kinetic_sweep: return "kinetic-sweep";
    case Subcommand::feedback_control: return "feedback-control";
    case Subcommand::certify_kernels: return "certify-kernels";
    case Subcommand::validate: return "validate";
  }
  return "?";
}

int run(const RunOptions& options, std::ostream& log) {
  try {
    auto raw = RawConfig::load(options.config);
    std::vector<Diagnostic> diags;
    for (const auto& o : options.overrides)
      if (auto d = raw.apply_override(o)) diags.push_back(*d);
    if (options.seed) raw.apply_override(fmt::format("initial.seed={}", *options.seed));
    if (options.plots) raw.apply_override(*options.plots ? "output.plots=on" : "output.plots=off");
    const auto config = build_config(raw, diags);

    if (options.subcommand == Subcommand::validate || !diags.empty()) {
      for (const auto& d : diags) log << options.config.string() << ": " << to_string(d) << "\n";
      if (options.subcommand == Subcommand::validate && diags.empty()) log << "config is valid\n";
      return diags.empty() ? ExitCode::ok : ExitCode::config_error;
    }

    Artifacts a;
    switch (options.subcommand) {
      case Subcommand::simulate: a = run_simulate(config, log); break;
      case Subcommand::meanfield_converge: a = run_meanfield_converge(config, log); break;
      case Subcommand::stability: a = run_stability(config, log); break;
      case Subcommand::optimize: a = run_optimize(config, log); break;
      case Subcommand::gamma_sweep: a = run_gamma_sweep(config, log); break;
      case Subcommand::kinetic_sweep: a = run_kinetic_sweep(config, log); break;
      case Subcommand::feedback_control: a = run_feedback(config, log); break;
      case Subcommand::certify_kernels: a = run_certify(config, log); break;
      case Subcommand::validate: break;
    }

    std::filesystem::create_directories(options.out_dir);
    std::sort(a.files.begin(), a.files.end());
    std::string manifest = fmt::format(
        "tool=lfsim\nversion={}\nsubcommand={}\nconfig={}\nconfig_sha256={}\nseed={}\nseeds={}\n"
        "compiler={}\nfmt={}\neigen={}.{}.{}\n",
        version, to_string(options.subcommand), options.config.string(), sha256_hex(raw.canonical()),
        config.seed, fmt::join(config.seeds, ","), compiler_id(), FMT_VERSION, EIGEN_WORLD_VERSION,
        EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION);
    for (const auto& [name, content] : a.files) {
      std::ofstream out(options.out_dir / name, std::ios::binary);
      out << content;
      if (!out) throw std::runtime_error(fmt::format("cannot write {}", (options.out_dir / name).string()));
      manifest += fmt::format("file {} sha256={} bytes={}\n", name, sha256_hex(content), content.size());
    }
    std::ofstream(options.out_dir / "manifest.txt", std::ios::binary) << manifest;

    if (options.check) {
      std::ifstream in(*options.check);
      if (!in) throw ConfigError(fmt::format("cannot read check fixture '{}'", options.check->string()));
      std::stringstream expected;
      expected << in.rdbuf();
      const auto it = std::find_if(a.files.begin(), a.files.end(),
                                   [&](const auto& f) { return f.first == a.primary; });
      const auto mismatch = compare_csv(it->second, expected.str(), options.check_rtol, options.check_atol);
      if (!mismatch.empty()) {
        log << fmt::format("check failed: {} vs {}: {}\n", a.primary, options.check->string(), mismatch);
        return ExitCode::regression;
      }
      log << fmt::format("check passed: {} matches {}\n", a.primary, options.check->string());
    }
    return a.status;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return ExitCode::config_error;
  } catch (const InputError& e) {
    log << "input error: " << e.what() << "\n";
    return ExitCode::config_error;
  } catch (const DomainError& e) {
    log << "domain error: " << e.what() << "\n";
    return ExitCode::numerical_error;
  } catch (const NumericalError& e) {
    log << "numerical error: " << e.what() << "\n";
    return ExitCode::numerical_error;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return ExitCode::failure;
  }
}

}  // namespace lf::cli
