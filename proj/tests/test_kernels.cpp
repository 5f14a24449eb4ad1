#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "lf/kernels.hpp"
#include "support.hpp"

using namespace lf;

TEST_CASE("eval_h catalog values") {
  const auto zero = KernelSpec::zero(2);
  CHECK(eval_h(zero, std::vector<double>{1, 2}) == std::vector<double>{0, 0});

  const auto ar = KernelSpec::attraction_repulsion(2);
  CHECK(eval_h(ar, std::vector<double>{0, 0}) == std::vector<double>{0, 0});
  const auto v = eval_h(ar, std::vector<double>{3, 4});
  CHECK(v[0] == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(-4.0 / 6.0).epsilon(1e-15));

  CHECK_THROWS_AS(eval_h(ar, std::vector<double>{1, 2, 3}), InputError);
}

TEST_CASE("eval_g catalog values") {
  const auto c = KernelSpec::constant(2);
  CHECK(eval_g(c, 1, std::vector<double>{7, -1}) == std::vector<double>{0, 1});
  const auto st = KernelSpec::stokes_like(2);
  const auto v = eval_g(st, 0, std::vector<double>{1, 0});
  CHECK(v[0] == 0.5);
  CHECK(v[1] == 0.0);
  CHECK(eval_g(KernelSpec::zero(3), 2, std::vector<double>{1, 2, 3}) ==
        std::vector<double>{0, 0, 0});
  CHECK_THROWS_AS(eval_g(st, 2, std::vector<double>{1, 0}), InputError);
}

TEST_CASE("catalog parity and purity by sampling") {
  auto g = test::rng(3);
  for (auto spec : {KernelSpec::constant(2, 0.7), KernelSpec::attraction_repulsion(2, 1.3),
                    KernelSpec::stokes_like(2, 2.0)}) {
    for (int s = 0; s < 200; ++s) {
      std::vector<double> xi{test::uni(g, -5, 5), test::uni(g, -5, 5)};
      std::vector<double> neg{-xi[0], -xi[1]};
      const auto h = eval_h(spec, xi), hn = eval_h(spec, neg);
      CHECK(h[0] == -hn[0]);
      CHECK(h[1] == -hn[1]);
      for (std::size_t l = 0; l < 2; ++l) CHECK(eval_g(spec, l, xi) == eval_g(spec, l, neg));
      CHECK(eval_h(spec, xi) == h);
    }
  }
}

TEST_CASE("analytic jacobians match central differences") {
  auto g = test::rng(5);
  for (auto spec : {KernelSpec::constant(2, 0.7), KernelSpec::attraction_repulsion(2, 1.3),
                    KernelSpec::stokes_like(2, 2.0)}) {
    for (int s = 0; s < 50; ++s) {
      std::vector<double> xi{test::uni(g, -3, 3), test::uni(g, -3, 3)};
      std::vector<double> jac(4);
      const double h = 1e-6;
      jacobian_h(spec, xi, jac);
      for (std::size_t c = 0; c < 2; ++c) {
        auto p = xi, m = xi;
        p[c] += h;
        m[c] -= h;
        const auto fp = eval_h(spec, p), fm = eval_h(spec, m);
        for (std::size_t r = 0; r < 2; ++r)
          CHECK(jac[r * 2 + c] == doctest::Approx((fp[r] - fm[r]) / (2 * h)).epsilon(1e-6));
      }
      for (std::size_t l = 0; l < 2; ++l) {
        jacobian_g(spec, l, xi, jac);
        for (std::size_t c = 0; c < 2; ++c) {
          auto p = xi, m = xi;
          p[c] += h;
          m[c] -= h;
          const auto fp = eval_g(spec, l, p), fm = eval_g(spec, l, m);
          for (std::size_t r = 0; r < 2; ++r)
            CHECK(jac[r * 2 + c] ==
                  doctest::Approx((fp[r] - fm[r]) / (2 * h)).epsilon(1e-6).scale(1.0));
        }
      }
    }
  }
}

TEST_CASE("certify_growth") {
  const auto zero = certify_growth(KernelSpec::zero(2), KernelRole::follower, 10.0, 500, 1);
  CHECK(zero.max_ratio == 0.0);
  CHECK(zero.pass);

  const auto ar =
      certify_growth(KernelSpec::attraction_repulsion(2), KernelRole::follower, 50.0, 5000, 1);
  CHECK(ar.max_ratio <= 1.0);
  CHECK(ar.pass);
  // Dense oracle on a 1-d ray: |H(r)| / (1 + r) = r / (1 + r)^2 <= 1/4.
  double dense = 0.0;
  for (int i = 0; i <= 100000; ++i) {
    const double r = 50.0 * i / 100000.0;
    dense = std::max(dense, r / ((1 + r) * (1 + r)));
  }
  CHECK(ar.max_ratio <= dense + 1e-12);
  CHECK(ar.lipschitz_estimate <= 1.0 + 1e-9);

  const auto c = certify_growth(KernelSpec::constant(3), KernelRole::leader, 5.0, 1000, 2);
  CHECK(c.max_ratio <= 1.0);
  CHECK(c.max_ratio == doctest::Approx(1.0));  // attained at the origin
  CHECK(c.lipschitz_estimate == 0.0);

  const auto again =
      certify_growth(KernelSpec::attraction_repulsion(2), KernelRole::follower, 50.0, 5000, 1);
  CHECK(again.max_ratio == ar.max_ratio);
  CHECK(again.lipschitz_estimate == ar.lipschitz_estimate);

  CHECK_THROWS_AS(certify_growth(KernelSpec::zero(1), KernelRole::leader, 0.0, 10, 1), InputError);
  CHECK_THROWS_AS(certify_growth(KernelSpec::zero(1), KernelRole::leader, 1.0, 0, 1), InputError);
}

TEST_CASE("growth bound holds on samples for every catalog kernel") {
  auto g = test::rng(9);
  for (auto spec : {KernelSpec::constant(2, -1.5), KernelSpec::attraction_repulsion(2, 2.0),
                    KernelSpec::stokes_like(2, 0.5)}) {
    const auto cert = certify_growth(spec, KernelRole::leader, 20.0, 2000, 4);
    REQUIRE(cert.pass);
    for (int s = 0; s < 500; ++s) {
      std::vector<double> xi{test::uni(g, -14, 14), test::uni(g, -14, 14)};
      CHECK(norm(eval_h(spec, xi)) <= cert.constant * (1 + norm(xi)) + 1e-12);
      for (std::size_t l = 0; l < 2; ++l)
        CHECK(norm(eval_g(spec, l, xi)) <= cert.constant * (1 + norm(xi)) + 1e-12);
    }
  }
}

TEST_CASE("radial tables") {
  const auto t = RadialTable::parse("# radius value\n0 1\n1 3 # peak\n2 2\n");
  CHECK(t(0.5) == 2.0);
  CHECK(t(1.5) == 2.5);
  CHECK(t(10.0) == 2.0);
  CHECK(t.slope(0.5) == 2.0);
  CHECK(t.slope(5.0) == 0.0);
  CHECK_THROWS_AS(RadialTable::parse("0 1\n0 2\n"), InputError);
  CHECK_THROWS_AS(RadialTable::parse("0 x\n"), InputError);

  const auto path = std::filesystem::temp_directory_path() / "lf_table_test.txt";
  std::ofstream(path) << "0 1\n2 1\n";
  const auto spec = KernelSpec::from_table(2, RadialTable::load(path));
  std::filesystem::remove(path);
  const auto h = eval_h(spec, std::vector<double>{3, 4});
  CHECK(h[0] == -3.0);
  CHECK(spec.growth_constant() == 1.0);
  std::vector<double> jac(4);
  jacobian_h(spec, std::vector<double>{0.3, 0.4}, jac);
  CHECK(jac[0] == doctest::Approx(-1.0).epsilon(1e-8));
  CHECK(jac[1] == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("kernel kind names round-trip") {
  for (auto k : {KernelKind::zero, KernelKind::constant, KernelKind::attraction_repulsion,
                 KernelKind::stokes_like, KernelKind::table})
    CHECK(parse_kernel_kind(to_string(k)) == k);
  CHECK_FALSE(parse_kernel_kind("nope").has_value());
}
