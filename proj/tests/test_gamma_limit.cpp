#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "lf/gamma_limit.hpp"
#include "support.hpp"

using namespace lf;

namespace {

Points pts(std::size_t d, std::vector<double> flat) { return Points(d, std::move(flat)); }

GammaProblem small_problem() {
  GammaProblem g;
  g.sampler = {InitialSampler::Kind::halton_box, {0.0}, 1.0};
  g.seed = 7;
  g.leaders0 = pts(1, {-0.5});
  g.kernels = KernelSet{KernelSpec::attraction_repulsion(1), {KernelSpec::stokes_like(1)}};
  g.target = pts(1, {1.0});
  g.control_weight = 1.0;
  g.dt = 0.02;
  g.guess = ControlSignal::zeros(1.0, 5, 1, 1, 2.0);
  g.options = {0.25, 3000, 1e-6};
  g.n_list = {25, 100};
  g.reference_n = 400;
  return g;
}

}  // namespace

TEST_CASE("limit cost with zero kernels has a closed form") {
  auto g = small_problem();
  g.kernels = KernelSet{KernelSpec::zero(1), {KernelSpec::zero(1)}};
  const auto atoms = g.sampler.sample(100, g.seed);
  double state = 0.0;
  for (std::size_t i = 0; i < 100; ++i) state += 0.5 * (atoms[i][0] - 1.0) * (atoms[i][0] - 1.0);
  state /= 100.0;
  for (double u : {0.0, 0.5, -1.5}) {
    ControlMatrix value(1, 1);
    value.flat()[0] = u;
    const auto c = ControlSignal::constant(1.0, value);
    CHECK(limit_cost(c, g, 100) == doctest::Approx(state + u * u).epsilon(1e-12));
  }
}

TEST_CASE("zero kernels: the optimal control is zero at every N") {
  auto g = small_problem();
  g.kernels = KernelSet{KernelSpec::zero(1), {KernelSpec::zero(1)}};
  for (auto& v : g.guess.values()) v.flat()[0] = 1.0;
  const auto rep = gamma_sweep(g);
  for (const auto& r : rep.rows) {
    CHECK(r.converged);
    for (const auto& v : r.control.values()) CHECK(std::abs(v.flat()[0]) <= 1e-5);
    CHECK(r.control_gap <= 1e-5);
  }
}

TEST_CASE("sweep on the reference fixture") {
  const auto g = small_problem();
  const auto rep = gamma_sweep(g);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.reference.converged);
  for (const auto& r : rep.rows) {
    CHECK(r.converged);
    CHECK(r.control.admissible());
    const double j0 = evaluate_cost(g.initial_state(r.n), g.guess, g.cost(), g.kernels, g.dt);
    CHECK(r.optimal_cost <= j0);
    // The reference optimum is no worse than any finite optimum on the reference problem.
    CHECK(rep.reference.cost <= r.limit_cost_estimate + 1e-9);
  }
  CHECK(rep.rows[1].control_gap < rep.rows[0].control_gap);
  CHECK(std::abs(rep.rows[1].optimal_cost - rep.reference.cost) <
        std::abs(rep.rows[0].optimal_cost - rep.reference.cost));

  std::ostringstream os;
  write_gamma_csv(os, rep);
  CHECK(os.str().rfind("N,J_opt,ctrl_gap,J_limit_est,converged\n25,", 0) == 0);
}

TEST_CASE("mean-field optimality residual agrees with the finite residual") {
  const auto g = small_problem();
  auto g2 = test::rng(5);
  for (int t = 0; t < 5; ++t) {
    auto u = g.guess;
    for (auto& v : u.values()) v.flat()[0] = test::uni(g2, -2, 2);
    const double finite = optimality_residual(g.initial_state(256), u, g.cost(), g.kernels, g.dt, 0.25);
    const double limit = infinite_optimality_residual(u, g, 256, 0.25);
    CHECK(limit == finite);
    const double f100 = optimality_residual(g.initial_state(100), u, g.cost(), g.kernels, g.dt, 0.25);
    CHECK(infinite_optimality_residual(u, g, 100, 0.25) == doctest::Approx(f100).epsilon(1e-13));
  }
}

TEST_CASE("gamma problem validation") {
  auto g = small_problem();
  g.reference_n = 64;
  CHECK_THROWS_AS(gamma_sweep(g), InputError);
  g = small_problem();
  g.n_list = {64, 16};
  CHECK_THROWS_AS(gamma_sweep(g), InputError);
  g = small_problem();
  g.target = pts(1, {1.0, 2.0});
  CHECK_THROWS_AS(gamma_sweep(g), InputError);
}
