#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "lf/meanfield.hpp"
#include "support.hpp"

using namespace lf;

namespace {

Points pts(std::size_t d, std::vector<double> flat) { return Points(d, std::move(flat)); }

InitialSampler box1d(double center = 0.0, double half = 1.0) {
  return {InitialSampler::Kind::halton_box, {center}, half};
}

// H(xi) = -xi, no leader coupling.
KernelSet linear_attraction() { return {KernelSpec::constant(1), {KernelSpec::zero(1)}}; }

}  // namespace

TEST_CASE("samplers are nested and deterministic") {
  for (auto kind : {InitialSampler::Kind::uniform_box, InitialSampler::Kind::gaussian,
                    InitialSampler::Kind::halton_box}) {
    InitialSampler s{kind, {0.5, -1.0}, 2.0};
    const auto big = s.sample(200, 17), small = s.sample(50, 17);
    CHECK(big.head(50) == small);
    CHECK(s.sample(200, 17) == big);
    CHECK_FALSE(s.sample(200, 18) == big);
  }
  CHECK_THROWS_AS(box1d().sample(0, 1), InputError);
}

TEST_CASE("static measures without forces") {
  const auto traj = solve_meanfield(box1d(), 3, 20, pts(1, {0.0}),
                                    ControlSignal::constant(1.0, pts(1, {0.0})), KernelSet::zero(1), 0.1);
  for (const auto& mu : traj.measures) CHECK(mu.atoms == traj.measures.front().atoms);
  CHECK(traj.n_particles == 20);
}

TEST_CASE("unit leader kernel translates every atom") {
  KernelSet k{KernelSpec::zero(1), {KernelSpec::constant(1)}};
  const double c = 0.75, dt = 0.125;
  const auto traj = solve_meanfield(box1d(), 5, 40, pts(1, {0.0}),
                                    ControlSignal::constant(1.0, pts(1, {c})), k, dt);
  for (std::size_t n = 0; n < traj.times.size(); ++n) {
    Points shifted = traj.measures.front().atoms;
    for (auto& x : shifted.flat()) x += c * traj.times[n];
    CHECK(wasserstein1(traj.measures[n], empirical_from_followers(shifted)) <= 1e-14);
    CHECK(traj.leader_paths[n][0][0] == c * traj.times[n]);
  }
}

TEST_CASE("linear attraction conserves the empirical mean") {
  const auto traj = solve_meanfield(box1d(0.3, 2.0), 9, 64, pts(1, {0.0}),
                                    ControlSignal::constant(2.0, pts(1, {0.0})), linear_attraction(), 0.01);
  auto mean = [](const WeightedMeasure& mu) {
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) s += mu.weights[i] * mu.atoms[i][0];
    return s;
  };
  const double m0 = mean(traj.measures.front());
  for (const auto& mu : traj.measures) CHECK(std::abs(mean(mu) - m0) <= 1e-10);
  CHECK(support_radius(traj.measures.back()) < support_radius(traj.measures.front()));
}

TEST_CASE("mass conservation and equality with the particle system") {
  auto g = test::rng(2);
  KernelSet k{KernelSpec::attraction_repulsion(2), {KernelSpec::stokes_like(2), KernelSpec::constant(2)}};
  const auto atoms = test::random_points(g, 30, 2);
  const auto leaders = test::random_points(g, 2, 2);
  ControlSignal u({0.0, 0.5, 1.0}, {test::random_points(g, 2, 2), test::random_points(g, 2, 2)});
  const auto mf = solve_meanfield(empirical_from_followers(atoms), leaders, u, k, 0.05);
  const auto direct = integrate(SwarmState{leaders, atoms, 0.0}, u, k, 0.05);
  REQUIRE(mf.times.size() == direct.states.size());
  for (std::size_t n = 0; n < mf.times.size(); ++n) {
    CHECK(mf.measures[n].atoms == direct.states[n].followers);
    CHECK(mf.leader_paths[n] == direct.states[n].leaders);
    CHECK(std::abs(mf.measures[n].total_mass() - 1.0) <= 1e-12);
    CHECK(mf.support_bound >= support_radius(mf.measures[n]));
  }
  CHECK_THROWS_AS(solve_meanfield(WeightedMeasure(pts(1, {0, 1}), {0.25, 0.75}), pts(1, {0}),
                                  ControlSignal::constant(1.0, pts(1, {0})), KernelSet::zero(1), 0.1),
                  InputError);
}

TEST_CASE("support stays inside the a-priori radius") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto g = test::rng(100 + seed);
    KernelSet k{KernelSpec::attraction_repulsion(2, test::uni(g, -1, 1)),
                {KernelSpec::stokes_like(2), KernelSpec::stokes_like(2, -1.0)}};
    const double umax = 1.0;
    auto u = test::random_points(g, 2, 2, 2.0);
    project_to_admissible(u, umax);
    const auto atoms = test::random_points(g, 40, 2);
    const auto traj = solve_meanfield(empirical_from_followers(atoms), test::random_points(g, 2, 2),
                                      ControlSignal::constant(1.5, u, umax), k, 0.01);
    const double c = apriori_constant(k, umax);
    double r0 = support_radius(traj.measures.front());
    for (std::size_t kk = 0; kk < 2; ++kk) r0 = std::max(r0, norm(traj.leader_paths.front()[kk]));
    CHECK(traj.support_bound <= (r0 + c * 1.5) * std::exp(c * 1.5));
  }
}

TEST_CASE("leader coupling is Lipschitz in the leader positions") {
  // sup_x |G^l * mu_{m,l}(x) - G^l * mu'_{m,l}(x)| <= U_max L_G (1/m) sum |Y_k - Y'_k|.
  auto g = test::rng(3);
  const auto st = KernelSpec::stokes_like(2, 1.5);
  const double lip = certify_growth(st, KernelRole::leader, 20.0, 20000, 1).lipschitz_estimate;
  for (int t = 0; t < 30; ++t) {
    const auto y = test::random_points(g, 3, 2), y2 = test::random_points(g, 3, 2);
    auto u = test::random_points(g, 3, 2, 2.0);
    const double umax = 1.0;
    project_to_admissible(u, umax);
    double gap = 0.0;
    for (std::size_t k = 0; k < 3; ++k) gap += distance(y[k], y2[k]) / 3.0;
    for (int s = 0; s < 20; ++s) {
      const std::vector<double> x{test::uni(g, -4, 4), test::uni(g, -4, 4)};
      for (std::size_t l = 0; l < 2; ++l) {
        const auto a = convolve_g(st, l, leader_control_measure(y, u, l), x);
        const auto b = convolve_g(st, l, leader_control_measure(y2, u, l), x);
        CHECK(distance(a, b) <= umax * lip * gap + 1e-12);
      }
    }
  }
}

TEST_CASE("weak residual") {
  const BumpFunction phi{{0.0}, 0.8};
  CHECK(phi.value(std::vector<double>{0.0}) == doctest::Approx(std::exp(-1.0)));
  CHECK(phi.value(std::vector<double>{0.8}) == 0.0);
  // Analytic gradient against central differences.
  for (double x : {-0.7, -0.2, 0.1, 0.55}) {
    std::vector<double> gr(1);
    phi.gradient(std::vector<double>{x}, gr);
    const double h = 1e-6;
    const double fd = (phi.value(std::vector<double>{x + h}) - phi.value(std::vector<double>{x - h})) / (2 * h);
    CHECK(gr[0] == doctest::Approx(fd).epsilon(1e-6));
  }

  const auto still = solve_meanfield(box1d(), 1, 30, pts(1, {0.0}),
                                     ControlSignal::constant(1.0, pts(1, {0.0})), KernelSet::zero(1), 0.1);
  CHECK(weak_residual(still, phi, 0.0, 1.0) == 0.0);

  KernelSet unit{KernelSpec::zero(1), {KernelSpec::constant(1)}};
  const auto moving = solve_meanfield(box1d(), 1, 30, pts(1, {0.0}),
                                      ControlSignal::constant(1.0, pts(1, {0.5})), unit, 0.1);
  CHECK(weak_residual(moving, BumpFunction{{10.0}, 1.0}, 0.0, 1.0) == 0.0);

  // First-order convergence in dt on a coupled run.
  KernelSet k{KernelSpec::attraction_repulsion(1, 2.0), {KernelSpec::stokes_like(1)}};
  ControlSignal u({0.0, 0.5, 1.0}, {pts(1, {1.0}), pts(1, {-0.5})});
  auto residual = [&](double dt) {
    const auto traj = solve_meanfield(box1d(0.0, 1.5), 4, 200, pts(1, {-1.0}), u, k, dt);
    return weak_residual(traj, BumpFunction{{0.2}, 1.0}, 0.0, 1.0);
  };
  const double r1 = residual(0.02), r2 = residual(0.01), r3 = residual(0.005);
  CHECK(r1 / r2 >= 1.5);
  CHECK(r1 / r2 <= 2.5);
  CHECK(r2 / r3 >= 1.5);
  CHECK(r2 / r3 <= 2.5);
}

TEST_CASE("stability experiment") {
  MeanFieldProblem still{box1d().sample(20, 1), pts(1, {0.0}),
                         ControlSignal::constant(1.0, pts(1, {0.5})), KernelSet::zero(1), 0.1};
  const auto rep = stability_experiment(still, Perturbation{0.1, 0.0}, 3);
  CHECK(rep.ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.chi_initial == doctest::Approx(0.1).epsilon(1e-12));
  CHECK_THROWS_AS(stability_experiment(still, Perturbation{0.0, 0.0}, 3), InputError);

  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    MeanFieldProblem p{box1d(0.0, 1.0).sample(60, seed), pts(1, {-0.5}),
                       ControlSignal({0.0, 0.5, 1.0}, {pts(1, {1.0}), pts(1, {-1.0})}),
                       KernelSet{KernelSpec::attraction_repulsion(1, -1.5), {KernelSpec::stokes_like(1, 2.0)}},
                       0.01};
    const auto r = stability_experiment(p, Perturbation{1e-2, 1e-2}, seed);
    CHECK(r.ratio >= 1.0);
    CHECK(r.ratio <= r.bound);
    CHECK(r.c_tilde > 0.0);
  }
}

TEST_CASE("convergence study") {
  ConvergenceStudy zero;
  zero.sampler = box1d();
  zero.seed = 8;
  zero.leaders0 = pts(1, {0.0});
  zero.kernels = KernelSet::zero(1);
  zero.dt = 0.1;
  zero.n_list = {10, 20, 40};
  zero.reference_n = 160;
  zero.reference_control = ControlSignal::constant(1.0, pts(1, {0.3}));
  const auto rows = convergence_study(zero);
  const auto ref = empirical_from_followers(zero.sampler.sample(160, 8));
  for (const auto& r : rows) {
    CHECK(r.max_w1 == wasserstein1(empirical_from_followers(zero.sampler.sample(r.n, 8)), ref));
    CHECK(r.max_leader_err == 0.0);
    CHECK(r.runtime_s == 0.0);
  }

  ConvergenceStudy att = zero;
  att.kernels = KernelSet{KernelSpec::attraction_repulsion(1, 1.0), {KernelSpec::stokes_like(1)}};
  att.dt = 0.01;
  att.n_list = {50, 100, 200};
  att.reference_n = 1600;
  // Controls converging to u*: offset 1/N.
  att.control_for = [](std::size_t n) {
    return ControlSignal::constant(1.0, pts(1, {0.3 + 1.0 / static_cast<double>(n)}));
  };
  const auto arows = convergence_study(att);
  CHECK(arows[0].max_w1 > arows[1].max_w1);
  CHECK(arows[1].max_w1 > arows[2].max_w1);
  CHECK(arows[0].max_leader_err > arows[1].max_leader_err);
  CHECK(arows[2].max_leader_err == doctest::Approx(1.0 / 200.0).epsilon(1e-9));

  std::ostringstream os;
  write_convergence_csv(os, arows);
  CHECK(os.str().rfind("N,max_W1,max_leader_err,runtime_s\n50,", 0) == 0);

  att.n_list = {100, 50};
  CHECK_THROWS_AS(convergence_study(att), InputError);
  att.n_list = {50, 2000};
  CHECK_THROWS_AS(convergence_study(att), InputError);
}
