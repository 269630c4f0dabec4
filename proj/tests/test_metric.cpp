#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include "generators.hpp"
#include "oracles.hpp"
#include "warpsol/metric.hpp"
#include "warpsol/sampling.hpp"

using namespace warpsol;
using testing::oracle_christoffel;
using testing::oracle_ricci;
using testing::random_exponent;
using testing::random_point;

namespace {

ConformalMetric half_plane() {
  // u = -log(x2): the hyperbolic upper half plane
  return ConformalMetric(constant(0.0) - log(variable(1)),
                         Domain(2, {-10.0, 0.05}, {10.0, 10.0}, 0.01));
}

Domain unit_box(int n) {
  return Domain(n, std::vector<double>(n, -1.0), std::vector<double>(n, 1.0), 0.1);
}

}  // namespace

TEST_CASE("half-plane Christoffel symbols match the frozen values") {
  const ConformalMetric g = half_plane();
  const std::vector<double> p{0.0, 1.0};
  const Christoffel c = g.christoffel(p);
  CHECK(c(1, 1, 1) == doctest::Approx(-1.0).epsilon(1e-14));  // Gamma^2_22
  CHECK(c(0, 0, 1) == doctest::Approx(-1.0).epsilon(1e-14));  // Gamma^1_12
  CHECK(c(1, 0, 0) == doctest::Approx(1.0).epsilon(1e-14));   // Gamma^2_11
  CHECK(c(0, 0, 0) == doctest::Approx(0.0));
  CHECK(c(0, 1, 1) == doctest::Approx(0.0));
  CHECK(c(1, 0, 1) == doctest::Approx(0.0));

  // scaling: at (0, 1/2) every symbol doubles
  const Christoffel ch = g.christoffel(std::vector<double>{0.0, 0.5});
  CHECK(ch(1, 1, 1) == doctest::Approx(-2.0).epsilon(1e-14));
}

TEST_CASE("hyperbolic space has Ric = -(n-1) g and S = -n(n-1)") {
  for (int n : {2, 3, 4}) {
    std::vector<double> lo(n, -5.0), hi(n, 5.0);
    lo.back() = 0.05;
    ConformalMetric g(constant(0.0) - log(variable(n - 1)),
                      Domain(n, lo, hi, 0.01));
    Rng rng(100 + n);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> p = random_point(rng, n, 2.0);
      p.back() = rng.next_in(0.2, 4.0);
      const double factor = g.conformal_factor(p);
      const SymMatrix ric = g.ricci(p);
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          const double expected = (i == j) ? -(n - 1) * factor : 0.0;
          CHECK(ric(i, j) == doctest::Approx(expected).epsilon(1e-10));
        }
      CHECK(g.scalar_curvature(p) ==
            doctest::Approx(-n * (n - 1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("adding a constant to u rescales S by e^{-2c} and fixes Ric") {
  Rng rng(2024);
  const Expr base = random_exponent(rng, 2);
  const double c = 0.7;
  ConformalMetric g0(base, unit_box(2));
  ConformalMetric g1(base + constant(c), unit_box(2));
  for (int trial = 0; trial < 25; ++trial) {
    const std::vector<double> p = random_point(rng, 2);
    CHECK(g1.scalar_curvature(p) ==
          doctest::Approx(std::exp(-2.0 * c) * g0.scalar_curvature(p))
              .epsilon(1e-12));
    const SymMatrix r0 = g0.ricci(p);
    const SymMatrix r1 = g1.ricci(p);
    for (int i = 0; i < 2; ++i)
      for (int j = i; j < 2; ++j)
        CHECK(r1(i, j) == doctest::Approx(r0(i, j)).epsilon(1e-12));
  }
}

TEST_CASE("contracted Bianchi identity holds on random metrics") {
  Rng rng(555);
  double worst = 0.0;
  for (int metric_idx = 0; metric_idx < 20; ++metric_idx) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 2);  // n in {2, 3}
    ConformalMetric g(random_exponent(rng, n), unit_box(n));
    for (int k = 0; k < 50; ++k) {
      const std::vector<double> p = random_point(rng, n);
      for (double r : g.bianchi_residual(p)) worst = std::max(worst, std::abs(r));
    }
  }
  MESSAGE("Bianchi sup over 20 metrics x 50 points: ", worst);
  CHECK(worst <= 1e-6);
}

TEST_CASE("symbolic curvature agrees with the finite-difference oracle") {
  Rng rng(808);
  const double h = 1e-3;
  for (int metric_idx = 0; metric_idx < 5; ++metric_idx) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 2);
    const Expr u = random_exponent(rng, n);
    ConformalMetric g(u, unit_box(n));
    for (int k = 0; k < 10; ++k) {
      const std::vector<double> p = random_point(rng, n, 0.6);

      const Christoffel sym_c = g.christoffel(p);
      const Christoffel orc_c = oracle_christoffel(u, p, h);
      for (int a = 0; a < n; ++a)
        for (int i = 0; i < n; ++i)
          for (int j = i; j < n; ++j) {
            const double rel = std::abs(sym_c(a, i, j) - orc_c(a, i, j)) /
                               std::max(1.0, std::abs(sym_c(a, i, j)));
            CHECK(rel <= 1e-6);
          }

      const SymMatrix sym_r = g.ricci(p);
      const SymMatrix orc_r = oracle_ricci(u, p, h);
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          const double rel = std::abs(sym_r(i, j) - orc_r(i, j)) /
                             std::max(1.0, std::abs(sym_r(i, j)));
          CHECK(rel <= 1e-6);
        }
    }
  }
}

TEST_CASE("covariant operators are consistent with each other") {
  Rng rng(616);
  const Expr u = random_exponent(rng, 3);
  const Expr phi = testing::random_expr(rng, 3, 3);
  const Expr psi = testing::random_expr(rng, 3, 3);
  ConformalMetric g(u, unit_box(3));
  for (int k = 0; k < 20; ++k) {
    const std::vector<double> p = random_point(rng, 3);
    double vals_ok = true;
    double lap, trace = 0.0, norm = 0.0, pairing_direct = 0.0;
    try {
      lap = g.laplacian(phi, p);
      const SymMatrix h = g.hessian(phi, p);
      const double ginv = 1.0 / g.conformal_factor(p);
      for (int i = 0; i < 3; ++i) trace += ginv * h(i, i);
      for (int i = 0; i < 3; ++i) {
        const double dphi = evaluate(differentiate(phi, i), p);
        const double dpsi = evaluate(differentiate(psi, i), p);
        norm += ginv * dphi * dphi;
        pairing_direct += ginv * dphi * dpsi;
      }
    } catch (const DomainError&) {
      vals_ok = false;
    }
    if (!vals_ok) continue;
    CHECK(lap == doctest::Approx(trace).epsilon(1e-10));
    CHECK(g.gradient_norm_sq(phi, p) == doctest::Approx(norm).epsilon(1e-10));
    CHECK(g.gradient_pairing(phi, psi, p) ==
          doctest::Approx(pairing_direct).epsilon(1e-10));
  }
}

TEST_CASE("geodesic acceleration contracts the Christoffel symbols") {
  Rng rng(717);
  const ConformalMetric g = half_plane();
  std::vector<double> scratch;
  for (int k = 0; k < 20; ++k) {
    const std::vector<double> x{rng.next_in(-3.0, 3.0), rng.next_in(0.3, 5.0)};
    const std::vector<double> v{rng.next_in(-2.0, 2.0), rng.next_in(-2.0, 2.0)};
    std::vector<double> acc(2);
    g.geodesic_acceleration(x, v, acc, scratch);
    const Christoffel c = g.christoffel(x);
    for (int a = 0; a < 2; ++a) {
      double expected = 0.0;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) expected -= c(a, i, j) * v[i] * v[j];
      CHECK(acc[a] == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("point evaluation is thread safe") {
  Rng rng(12);
  ConformalMetric g(random_exponent(rng, 2), unit_box(2));
  std::vector<std::vector<double>> pts;
  std::vector<double> expected;
  for (int i = 0; i < 500; ++i) {
    pts.push_back(random_point(rng, 2));
    expected.push_back(g.scalar_curvature(pts.back()));
  }
  std::atomic<int> mismatches{0};
  std::vector<std::thread> workers;
  for (int w = 0; w < 8; ++w)
    workers.emplace_back([&] {
      for (std::size_t i = 0; i < pts.size(); ++i)
        if (g.scalar_curvature(pts[i]) != expected[i]) ++mismatches;
    });
  for (auto& t : workers) t.join();
  CHECK(mismatches.load() == 0);
}

TEST_CASE("non-finite exponent values surface as DomainError") {
  // The metric trusts callers about the box; leaving it where the exponent
  // turns singular (log of a negative here) must throw, not return NaN.
  const ConformalMetric g = half_plane();
  CHECK_THROWS_AS(g.scalar_curvature(std::vector<double>{0.0, -1.0}), DomainError);
}
