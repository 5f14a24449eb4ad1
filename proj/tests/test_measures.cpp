#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "lf/measures.hpp"
#include "support.hpp"

using namespace lf;

namespace {

Points pts(std::size_t d, std::vector<double> flat) { return Points(d, std::move(flat)); }

WeightedMeasure uniform_on(const Points& p) { return empirical_from_followers(p); }

// Expands a measure whose weights are multiples of 1/q into q equal atoms.
Points expand(const WeightedMeasure& mu, int q) {
  Points out(0, mu.dim());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const int copies = static_cast<int>(std::lround(mu.weights[i] * q));
    for (int c = 0; c < copies; ++c) out.push_back(mu.atoms[i]);
  }
  return out;
}

}  // namespace

TEST_CASE("empirical and leader measures") {
  const auto one = empirical_from_followers(pts(2, {1, 2}));
  CHECK(one.weights == std::vector<double>{1.0});
  const auto dup = empirical_from_followers(pts(1, {3, 3}));
  CHECK(dup.size() == 2);
  CHECK(dup.weights == std::vector<double>{0.5, 0.5});
  CHECK(empirical_from_followers(pts(1, {1, 2, 3, 4})).weights ==
        std::vector<double>{0.25, 0.25, 0.25, 0.25});

  const auto y = pts(1, {0, 1});
  CHECK(leader_control_measure(y, pts(1, {0, 0}), 0).weights == std::vector<double>{0, 0});
  CHECK(leader_control_measure(y, pts(1, {1, 1}), 0).weights == std::vector<double>{0.5, 0.5});
  const auto s = leader_control_measure(y, pts(1, {1, -1}), 0);
  CHECK(s.weights == std::vector<double>{0.5, -0.5});
  CHECK(s.kind == MeasureKind::signed_measure);
}

TEST_CASE("measure invariants are enforced") {
  CHECK_THROWS_AS(WeightedMeasure(pts(1, {0, 1}), {0.5, 0.6}), InputError);
  CHECK_THROWS_AS(WeightedMeasure(pts(1, {0, 1}), {1.5, -0.5}), InputError);
  CHECK_THROWS_AS(WeightedMeasure(pts(1, {0, 1}), {1.0}), InputError);
  CHECK_NOTHROW(WeightedMeasure(pts(1, {0, 1}), {1.5, -0.5}, MeasureKind::signed_measure));
}

TEST_CASE("convolution") {
  const auto h = KernelSpec::constant(1);
  const WeightedMeasure mu(pts(1, {0, 2}), {0.5, 0.5});
  CHECK(convolve_h(h, mu, std::vector<double>{0.0}) == std::vector<double>{1.0});
  CHECK(convolve_h(KernelSpec::zero(1), mu, std::vector<double>{0.0}) == std::vector<double>{0.0});
  const WeightedMeasure dirac(pts(2, {1, -1}), {1.0});
  const auto ar = KernelSpec::attraction_repulsion(2);
  const std::vector<double> x{2.5, 0.5};
  CHECK(convolve_h(ar, dirac, x) == eval_h(ar, std::vector<double>{1.5, 1.5}));

  // Linearity over signed measures.
  auto g = test::rng(4);
  const auto st = KernelSpec::stokes_like(2);
  for (int t = 0; t < 50; ++t) {
    const auto atoms = test::random_points(g, 5, 2);
    std::vector<double> wa(5), wb(5), wc(5);
    const double alpha = test::uni(g, -2, 2), beta = test::uni(g, -2, 2);
    for (int i = 0; i < 5; ++i) {
      wa[i] = test::uni(g, -1, 1);
      wb[i] = test::uni(g, -1, 1);
      wc[i] = alpha * wa[i] + beta * wb[i];
    }
    const WeightedMeasure a(atoms, wa, MeasureKind::signed_measure),
        b(atoms, wb, MeasureKind::signed_measure), c(atoms, wc, MeasureKind::signed_measure);
    const std::vector<double> p{test::uni(g, -3, 3), test::uni(g, -3, 3)};
    for (std::size_t l = 0; l < 2; ++l) {
      const auto ca = convolve_g(st, l, a, p), cb = convolve_g(st, l, b, p),
                 cc = convolve_g(st, l, c, p);
      for (std::size_t q = 0; q < 2; ++q)
        CHECK(std::abs(cc[q] - (alpha * ca[q] + beta * cb[q])) <= 1e-12 * (1 + std::abs(cc[q])));
    }
  }
}

TEST_CASE("wasserstein1 examples") {
  CHECK(wasserstein1(uniform_on(pts(2, {0, 0})), uniform_on(pts(2, {3, 4}))) == 5.0);
  CHECK(wasserstein1(uniform_on(pts(1, {0, 1})), uniform_on(pts(1, {0, 2}))) == 0.5);
  const auto mu = uniform_on(pts(2, {0, 1, 2, 3, -1, 0.5}));
  CHECK(wasserstein1(mu, mu) == 0.0);

  const WeightedMeasure signed_mu(pts(1, {0, 1}), {1.5, -0.5}, MeasureKind::signed_measure);
  CHECK_THROWS_AS(wasserstein1(signed_mu, uniform_on(pts(1, {0}))), DomainError);
  const WeightedMeasure light(pts(1, {0}), {0.5}, MeasureKind::signed_measure);
  CHECK_THROWS_AS(wasserstein1(light, uniform_on(pts(1, {0}))), DomainError);
}

TEST_CASE("wasserstein1 solvers agree with brute force") {
  auto g = test::rng(7);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(t % 5);
    const auto a = test::random_points(g, n, 2), b = test::random_points(g, n, 2);
    const double oracle = test::brute_force_w1(a, b);
    CHECK(wasserstein1(uniform_on(a), uniform_on(b)) == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(wasserstein1_flow(uniform_on(a), uniform_on(b)) == doctest::Approx(oracle).epsilon(1e-10));

    const auto a1 = test::random_points(g, n, 1), b1 = test::random_points(g, n, 1);
    const double sorted = wasserstein1_sorted(uniform_on(a1), uniform_on(b1));
    CHECK(std::abs(sorted - wasserstein1_assignment(uniform_on(a1), uniform_on(b1))) <= 1e-12);
    CHECK(sorted == doctest::Approx(test::brute_force_w1(a1, b1)).epsilon(1e-12));
  }
}

TEST_CASE("weighted transport matches expanded assignment") {
  auto g = test::rng(8);
  const int q = 6;
  for (int t = 0; t < 30; ++t) {
    auto random_weighted = [&](std::size_t n, std::size_t d) {
      // Random composition of q units into n positive parts.
      std::vector<double> w(n, 1.0 / q);
      for (int extra = static_cast<int>(n); extra < q; ++extra)
        w[std::uniform_int_distribution<std::size_t>(0, n - 1)(g)] += 1.0 / q;
      return WeightedMeasure(test::random_points(g, n, d), w);
    };
    for (std::size_t d : {1u, 2u}) {
      const auto mu = random_weighted(2 + t % 3, d), nu = random_weighted(3 + t % 2, d);
      const double oracle = test::brute_force_w1(expand(mu, q), expand(nu, q));
      CHECK(wasserstein1(mu, nu) == doctest::Approx(oracle).epsilon(1e-10));
      CHECK(wasserstein1_flow(mu, nu) == doctest::Approx(oracle).epsilon(1e-10));
      if (d == 1) CHECK(wasserstein1_sorted(mu, nu) == doctest::Approx(oracle).epsilon(1e-10));
    }
  }
}

TEST_CASE("wasserstein1 is a metric on samples") {
  auto g = test::rng(9);
  for (int t = 0; t < 40; ++t) {
    const std::size_t d = 1 + static_cast<std::size_t>(t % 2);
    const auto a = uniform_on(test::random_points(g, 5, d)), b = uniform_on(test::random_points(g, 5, d)),
               c = uniform_on(test::random_points(g, 5, d));
    CHECK(wasserstein1(a, b) == wasserstein1(b, a));
    CHECK(wasserstein1(a, c) <= wasserstein1(a, b) + wasserstein1(b, c) + 1e-9);
  }
}

TEST_CASE("chi distance and support radius") {
  const auto mu = uniform_on(pts(1, {0})), nu = uniform_on(pts(1, {2}));
  CHECK(chi_distance(pts(1, {0}), mu, pts(1, {1}), nu) == 3.0);
  CHECK(chi_distance(pts(1, {0}), mu, pts(1, {0}), mu) == 0.0);
  const auto m2 = uniform_on(pts(2, {1, 2, -1, 0}));
  CHECK(chi_distance(pts(2, {0, 0, 1, 1}), m2, pts(2, {3, 4, 4, 5}), m2) == 5.0);

  CHECK(support_radius(uniform_on(pts(2, {0, 0}))) == 0.0);
  CHECK(support_radius(uniform_on(pts(2, {3, 4, 1, 0}))) == 5.0);
}

TEST_CASE("measure csv round trip") {
  const WeightedMeasure mu(pts(2, {0.1, -2.5, 1e-17, 3}), {0.3, 0.7});
  std::stringstream ss;
  write_measure_csv(ss, mu);
  CHECK(ss.str().rfind("w,x_1,x_2\n", 0) == 0);
  const auto back = read_measure_csv(ss);
  CHECK(back.atoms == mu.atoms);
  CHECK(back.weights == mu.weights);
}
