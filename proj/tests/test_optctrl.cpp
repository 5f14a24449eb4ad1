#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "lf/optctrl.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace lf;

namespace {

Points pts(std::size_t d, std::vector<double> flat) { return Points(d, std::move(flat)); }

using test::fd_gradient;

std::vector<double> scaled(const ControlSignal& u, const std::vector<ControlMatrix>& g) {
  std::vector<double> out;
  for (std::size_t p = 0; p < g.size(); ++p)
    for (double v : g[p].flat()) out.push_back(u.piece_length(p) * v);
  return out;
}

double rel_vec(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

KernelSet unit_leader_1d() { return {KernelSpec::zero(1), {KernelSpec::constant(1)}}; }

}  // namespace

TEST_CASE("evaluate_cost closed forms") {
  SwarmState at_target{pts(1, {0.0}), pts(1, {1.0}), 0.0};
  CostSpec cost{pts(1, {1.0})};
  CHECK(evaluate_cost(at_target, ControlSignal::constant(1.0, pts(1, {0.0})), cost, KernelSet::zero(1), 0.1) == 0.0);

  SwarmState off{pts(2, {0.0, 0.0}), pts(2, {0.0, 0.0}), 0.0};
  CostSpec far{pts(2, {0.6, 0.8})};
  CHECK(evaluate_cost(off, ControlSignal::constant(2.0, pts(2, {0.0, 0.0})), far, KernelSet::zero(2), 0.1) ==
        doctest::Approx(0.5 * 2.0).epsilon(1e-14));

  CostSpec no_state{pts(2, {0.6, 0.8}), 1.0, 0.0};
  CHECK(evaluate_cost(off, ControlSignal::constant(2.0, pts(2, {0.3, -0.4})), no_state, KernelSet::zero(2), 0.1) ==
        doctest::Approx(2.0 * 0.25).epsilon(1e-14));

  CHECK_THROWS_AS(evaluate_cost(off, ControlSignal::constant(1.0, pts(2, {0, 0})), CostSpec{pts(2, {0, 0}), 0.0},
                                KernelSet::zero(2), 0.1),
                  InputError);
}

TEST_CASE("adjoint closed forms") {
  SwarmState s{pts(1, {0.0}), pts(1, {0.25}), 0.0};
  CostSpec cost{pts(1, {1.0})};
  const double dt = 0.01;
  const auto traj = integrate(s, ControlSignal::constant(1.0, pts(1, {0.0})), KernelSet::zero(1), dt);
  const auto adj = solve_adjoint(traj, cost, KernelSet::zero(1));
  for (std::size_t n = 0; n + 1 < adj.states.size(); ++n) {
    const double t = adj.states[n].time;
    // Discrete sweep: -(T - t - dt/2)(X - x*); continuous: -(T - t)(X - x*).
    CHECK(adj.states[n].xi_x[0][0] == doctest::Approx((1.0 - t - dt / 2) * 0.75).epsilon(1e-12));
    CHECK(std::abs(adj.states[n].xi_x[0][0] - (1.0 - t) * 0.75) <= dt);
    CHECK(adj.states[n].xi_y[0][0] == 0.0);
  }
  CHECK(adj.states.back().xi_x[0][0] == 0.0);

  auto g = test::rng(1);
  KernelSet k{KernelSpec::attraction_repulsion(2), {KernelSpec::stokes_like(2), KernelSpec::constant(2)}};
  SwarmState s2{test::random_points(g, 2, 2), test::random_points(g, 4, 2), 0.0};
  const auto u = ControlSignal::constant(1.0, test::random_points(g, 2, 2));
  CostSpec zero_state{pts(2, {0, 0}), 1.0, 0.0};
  const auto adj0 = solve_adjoint(integrate(s2, u, k, 0.05), zero_state, k);
  for (const auto& a : adj0.states) {
    for (double v : a.xi_x.flat()) CHECK(v == 0.0);
    for (double v : a.xi_y.flat()) CHECK(v == 0.0);
  }

  KernelSet no_g{KernelSpec::attraction_repulsion(2), {KernelSpec::zero(2), KernelSpec::zero(2)}};
  const auto adj1 = solve_adjoint(integrate(s2, u, no_g, 0.05), CostSpec{pts(2, {1, 1})}, no_g);
  for (const auto& a : adj1.states)
    for (double v : a.xi_y.flat()) CHECK(v == 0.0);

  CHECK_THROWS_AS(solve_adjoint(integrate(s2, u, k, 0.05, Integrator::rk4), CostSpec{pts(2, {1, 1})}, k),
                  InputError);
}

TEST_CASE("control gradient special cases") {
  SwarmState s{pts(1, {0.0}), pts(1, {0.0}), 0.0};
  CostSpec zero_state{pts(1, {1.0}), 1.0, 0.0};
  const auto g0 = cost_gradient(s, ControlSignal::zeros(1.0, 4, 1, 1), zero_state, unit_leader_1d(), 0.05);
  for (const auto& gp : g0) CHECK(gp[0][0] == 0.0);

  ControlSignal u({0.0, 0.5, 1.0}, {pts(1, {0.3}), pts(1, {-0.7})});
  const auto g1 = cost_gradient(s, u, CostSpec{pts(1, {1.0})}, KernelSet::zero(1), 0.05);
  CHECK(g1[0][0][0] == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(g1[1][0][0] == doctest::Approx(-1.4).epsilon(1e-14));
}

TEST_CASE("adjoint gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    auto g = test::rng(1000 + seed);
    const std::size_t d = 1 + seed % 2, m = 1 + (seed / 2) % 2, n = 2 + seed % 4;
    KernelSet k{KernelSpec::attraction_repulsion(d, test::uni(g, -1.5, 1.5)), {}};
    for (std::size_t l = 0; l < d; ++l)
      k.g.push_back(l % 2 == 0 ? KernelSpec::stokes_like(d, test::uni(g, 0.5, 2))
                               : KernelSpec::constant(d, test::uni(g, -1, 1)));
    SwarmState s{test::random_points(g, m, d), test::random_points(g, n, d), 0.0};
    ControlSignal u({0.0, 0.3, 0.7, 1.0},
                    {test::random_points(g, m, d), test::random_points(g, m, d), test::random_points(g, m, d)});
    CostSpec cost{test::random_points(g, seed % 3 == 0 ? 1 : n, d), test::uni(g, 0.5, 2.0)};
    const double dt = 0.01;
    const auto adj = scaled(u, cost_gradient(s, u, cost, k, dt));
    const auto fd = fd_gradient(s, u, cost, k, dt);
    CHECK(rel_vec(adj, fd) <= 1e-5);
  }
}

TEST_CASE("table kernels use finite-difference jacobians") {
  auto g = test::rng(5);
  const auto table = RadialTable::parse("0 1\n0.5 0.2\n1 0.8\n3 -0.5\n");
  KernelSet k{KernelSpec::from_table(2, table), {KernelSpec::from_table(2, table), KernelSpec::stokes_like(2)}};
  SwarmState s{test::random_points(g, 1, 2), test::random_points(g, 4, 2), 0.0};
  const auto u = ControlSignal::constant(1.0, test::random_points(g, 1, 2));
  CostSpec cost{pts(2, {0.5, 0.5})};
  CHECK(rel_vec(scaled(u, cost_gradient(s, u, cost, k, 0.02)), fd_gradient(s, u, cost, k, 0.02)) <= 1e-4);
}

TEST_CASE("optimize examples") {
  SwarmState s{pts(1, {0.0}), pts(1, {0.0}), 0.0};
  // Zero kernels: u* = 0.
  const auto r0 = optimize(s, ControlSignal::constant(1.0, pts(1, {0.8}), 2.0), CostSpec{pts(1, {1.0})},
                           KernelSet::zero(1), 0.05);
  CHECK(r0.converged);
  CHECK(std::abs(r0.control.values()[0][0][0]) <= 1e-6);

  // U_max = 0: nothing to optimise.
  const auto rz = optimize(s, ControlSignal::constant(1.0, pts(1, {0.8}), 0.0), CostSpec{pts(1, {1.0})},
                           unit_leader_1d(), 0.05);
  CHECK(rz.converged);
  CHECK(rz.iterations == 0);
  CHECK(rz.control.values()[0][0][0] == 0.0);

  // One follower copying one leader, pushed toward x* = 1, constant controls.
  const double umax = 2.0, dt = 0.01;
  CostSpec cost{pts(1, {1.0})};
  const auto guess = ControlSignal::constant(1.0, pts(1, {0.0}), umax);
  const auto r = optimize(s, guess, cost, unit_leader_1d(), dt, {0.25, 2000, 1e-7});
  CHECK(r.converged);
  CHECK(r.optimality_residual <= 1e-7);
  CHECK(r.cost < evaluate_cost(s, guess, cost, unit_leader_1d(), dt));
  CHECK(r.cost == doctest::Approx(evaluate_cost(s, r.control, cost, unit_leader_1d(), dt)).epsilon(1e-12));
  for (std::size_t i = 1; i < r.cost_history.size(); ++i) CHECK(r.cost_history[i] <= r.cost_history[i - 1]);

  // Dense grid search over constant controls at resolution 1e-3.
  double best_u = 0.0, best = INFINITY;
  for (int i = -2000; i <= 2000; ++i) {
    const double c = i * 1e-3;
    const double j = evaluate_cost(s, ControlSignal::constant(1.0, pts(1, {c}), umax), cost, unit_leader_1d(), dt);
    if (j < best) {
      best = j;
      best_u = c;
    }
  }
  CHECK(std::abs(r.control.values()[0][0][0] - best_u) <= 1e-3);
  CHECK(r.cost <= best + 1e-12);
  CHECK(optimality_residual(s, guess, cost, unit_leader_1d(), dt, 0.25) > 1e-6);
  const double tol = 1e-6;
  CHECK(optimality_residual(s, ControlSignal::constant(1.0, pts(1, {best_u}), umax), cost, unit_leader_1d(), dt,
                            0.25) <= 10 * tol + 1e-3 * 2.0 * 1.3);

  // Tight bound: the optimum sits on the constraint and the residual still vanishes.
  const auto rc = optimize(s, ControlSignal::constant(1.0, pts(1, {0.0}), 0.1), cost, unit_leader_1d(), dt);
  CHECK(rc.converged);
  CHECK(rc.control.values()[0][0][0] == doctest::Approx(0.1));
}

TEST_CASE("projection is idempotent") {
  auto g = test::rng(6);
  for (int t = 0; t < 100; ++t) {
    auto u = test::random_points(g, 3, 2, 4.0);
    project_to_admissible(u, 1.3);
    auto again = u;
    project_to_admissible(again, 1.3);
    CHECK(again == u);
  }
}

TEST_CASE("control csv round trip and summary") {
  ControlSignal u({0.0, 0.25, 1.0}, {pts(2, {0.1, 0.2, 0.3, 0.4}), pts(2, {-1, 0, 1e-20, 2})}, 3.0);
  std::stringstream ss;
  write_control_csv(ss, u);
  CHECK(ss.str().rfind("t_start,t_end,u_1_1,u_1_2,u_2_1,u_2_2\n", 0) == 0);
  const auto back = read_control_csv(ss, 3.0);
  CHECK(back.breakpoints() == u.breakpoints());
  CHECK(back.values() == u.values());

  OptimizeResult r;
  r.cost = 1.5;
  r.control = u;
  std::ostringstream os;
  write_optimize_summary(os, r);
  CHECK(os.str().find("cost=1.5\n") != std::string::npos);
  CHECK(os.str().find("converged=false\n") != std::string::npos);
}
