#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "generators.hpp"
#include "warpsol/gallery.hpp"
#include "warpsol/sampling.hpp"
#include "warpsol/soliton.hpp"

using namespace warpsol;

namespace {

Domain flat_box(int n, double half_width) {
  return Domain(n, std::vector<double>(n, -half_width),
                std::vector<double>(n, half_width), 0.2);
}

Expr abs_sq(int n) {
  Expr s = variable(0) * variable(0);
  for (int i = 1; i < n; ++i) s = s + variable(i) * variable(i);
  return s;
}

// Flat R^3 base, unit warping onto a 2-sphere fiber of Einstein constant
// 1/2, phi = |x|^2/4. The soliton function is Lambda = 1/2 and the
// warped scalar curvature is the constant m mu / f^2 = 1, so any split
// lambda + rho * 1 = 1/2 is an equivalent declaration.
WarpedSolitonData gaussian_shrinker(SolitonMode mode, double mu = 0.5) {
  const int n = 3;
  ConformalMetric base(constant(0.0), flat_box(n, 15.0));
  return WarpedSolitonData(std::move(base), constant(1.0),
                           abs_sq(n) * constant(0.25), std::move(mode), 2, mu);
}

}  // namespace

TEST_CASE("gaussian shrinker satisfies every equation to machine precision") {
  WarpedSolitonData data = gaussian_shrinker(RhoEinsteinMode{0.4, 0.1});
  auto pts = sample_points(data.domain(), 200, 11, false);
  const ResidualReport rep = verify_soliton(data, pts, Tolerances{});

  CHECK(rep.pass);
  CHECK(rep.base_eq.sup <= 1e-12);
  CHECK(rep.integrability.sup <= 1e-12);
  CHECK(rep.vertical.sup <= 1e-12);
  CHECK(rep.trace_base.sup <= 1e-12);
  CHECK(rep.trace_warped.sup <= 1e-12);
  REQUIRE(rep.has_catino);
  CHECK(rep.catino.sup <= 1e-12);
  CHECK(rep.mu_hat == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rep.mu_spread <= 1e-12);
  CHECK_FALSE(rep.rho_at_one_sixth);

  const ScalarBoundReport bound = scalar_bound_report(data, pts);
  CHECK(bound.flag == ScalarBoundReport::Flag::consistent);
  CHECK(bound.bound == doctest::Approx(0.0));
  CHECK(bound.sampled_inf == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("explicit-Lambda gaussian lands in the Ricci-soliton regime") {
  WarpedSolitonData data = gaussian_shrinker(ExplicitLambdaMode{constant(0.5)});
  auto pts = sample_points(data.domain(), 150, 5, false);
  const ResidualReport rep = verify_soliton(data, pts, Tolerances{});

  CHECK(rep.pass);
  CHECK_FALSE(rep.has_catino);
  CHECK(rep.alpha.degenerate);
  CHECK_FALSE(rep.constants.valid);
  CHECK(rep.constants.note.find("Ricci-soliton regime") != std::string::npos);
  CHECK(std::isnan(rep.constants.rho));

  // scalar_bound_report needs a declared (lambda, rho) pair
  CHECK_THROWS_AS(scalar_bound_report(data, pts), std::invalid_argument);
}

TEST_CASE("a wrong fiber constant shows up in the vertical residual") {
  // Explicit Lambda pins the base equation, so the bad mu is isolated
  // to the vertical equation instead of leaking through S_g into Lambda.
  WarpedSolitonData data = gaussian_shrinker(ExplicitLambdaMode{constant(0.5)}, 0.0);
  auto pts = sample_points(data.domain(), 100, 3, false);
  const ResidualReport rep = verify_soliton(data, pts, Tolerances{});
  CHECK_FALSE(rep.pass);
  CHECK(rep.vertical.sup == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rep.base_eq.sup <= 1e-12);

  // In rho mode the same bad mu also shifts S_g and hence Lambda.
  WarpedSolitonData rho_data = gaussian_shrinker(RhoEinsteinMode{0.4, 0.1}, 0.0);
  const ResidualReport rho_rep = verify_soliton(rho_data, pts, Tolerances{});
  CHECK_FALSE(rho_rep.pass);
  CHECK(rho_rep.vertical.sup == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(rho_rep.base_eq.sup == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("a mis-set rho split moves the residuals above 1e-3") {
  // lambda + rho S_g must equal 1/2; this split misses it by 0.1
  WarpedSolitonData data = gaussian_shrinker(RhoEinsteinMode{0.4, 0.2});
  auto pts = sample_points(data.domain(), 100, 3, false);
  const ResidualReport rep = verify_soliton(data, pts, Tolerances{});
  CHECK_FALSE(rep.pass);
  CHECK(rep.base_eq.sup > 1e-3);
  REQUIRE(rep.has_catino);
  CHECK(rep.catino.sup > 1e-3);
}

TEST_CASE("a potential bump of 0.1 is detected") {
  const int n = 3;
  ConformalMetric base(constant(0.0), flat_box(n, 15.0));
  const Expr bumped =
      abs_sq(n) * constant(0.25) + constant(0.1) * exp(constant(0.0) - abs_sq(n));
  WarpedSolitonData data(std::move(base), constant(1.0), bumped,
                         RhoEinsteinMode{0.4, 0.1}, 2, 0.5);
  auto pts = sample_points(data.domain(), 400, 9, false);
  const ResidualReport rep = verify_soliton(data, pts, Tolerances{});
  CHECK_FALSE(rep.pass);
  CHECK(rep.base_eq.sup > 1e-3);
}

TEST_CASE("constructor rejects malformed inputs with specific messages") {
  const auto make = [](SolitonMode mode, int m, int n = 3) {
    ConformalMetric base(constant(0.0), Domain(n, std::vector<double>(n, -1.0),
                                               std::vector<double>(n, 1.0), 0.1));
    return WarpedSolitonData(std::move(base), constant(1.0), constant(0.0),
                             std::move(mode), m, 0.0);
  };
  CHECK_THROWS_WITH_AS(make(RhoEinsteinMode{0.0, 0.0}, 1),
                       doctest::Contains("Ricci-soliton regime"),
                       std::invalid_argument);
  CHECK_THROWS_AS(make(RhoEinsteinMode{0.0, 0.1}, 0), std::invalid_argument);
  // total dimension n + m = 2 cannot carry the (lambda, rho) structure
  CHECK_THROWS_WITH_AS(make(RhoEinsteinMode{0.0, 0.1}, 1, 1),
                       doctest::Contains("n + m >= 3"), std::invalid_argument);
  // but the explicit-Lambda mode accepts it
  CHECK_NOTHROW(make(ExplicitLambdaMode{constant(0.0)}, 1, 1));
}

TEST_CASE("verify reports the offending point when the warping dips") {
  ConformalMetric base(constant(0.0), flat_box(2, 2.0));
  // f = x1 changes sign inside the box
  WarpedSolitonData data(std::move(base), variable(0), constant(0.0),
                         ExplicitLambdaMode{constant(0.0)}, 1, 0.0);
  auto pts = sample_points(data.domain(), 50, 1, false);
  CHECK_THROWS_AS(verify_soliton(data, pts, Tolerances{}), DomainError);
}

TEST_CASE("alpha estimation identifies the proportionality constant") {
  // cosh_traceless at its default parameters has alpha = -1 exactly
  WarpedSolitonData data = build_example(default_spec(ExampleId::cosh_traceless));
  auto pts = sample_points(data.domain(), 200, 2024, false);
  const AlphaEstimate est = estimate_alpha(data, pts, kAlphaGradientThreshold);
  CHECK_FALSE(est.degenerate);
  CHECK(est.alpha == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(est.spread <= 1e-7);

  const SolitonConstants constants = derive_soliton_constants(data, pts);
  CHECK(constants.valid);
  CHECK(constants.rho == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(constants.lambda == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(constants.lambda_spread <= 1e-7);
}

TEST_CASE("scalar bound window excludes rho above the Schouten value") {
  // cosh_traceless declares rho = 1/3 with N = 3; the admissible window is
  // (0, 1/4], so the report must refuse to assert a bound
  WarpedSolitonData data = build_example(default_spec(ExampleId::cosh_traceless));
  auto pts = sample_points(data.domain(), 100, 4, false);
  const ScalarBoundReport bound = scalar_bound_report(data, pts);
  CHECK(bound.flag == ScalarBoundReport::Flag::out_of_range);
  CHECK(std::isnan(bound.bound));
}

TEST_CASE("schouten boundary value is inside the window and can be violated") {
  // schouten_linear with c > 0: rho = 1/6 at N = 4 sits exactly on the
  // boundary; lambda > 0 makes the bound min{0, lambda N/(1 - rho N)} = 0,
  // and the example's everywhere-negative scalar curvature violates it
  // (the bound presumes completeness, which this family lacks).
  ExampleSpec spec = default_spec(ExampleId::schouten_linear);
  spec.c = 0.5;
  WarpedSolitonData data = build_example(spec);
  auto pts = sample_points(data.domain(), 100, 4, false);
  const ScalarBoundReport bound = scalar_bound_report(data, pts);
  CHECK(bound.flag == ScalarBoundReport::Flag::violated);
  CHECK(bound.bound == doctest::Approx(0.0));
  CHECK(bound.sampled_inf < 0.0);
  CHECK(bound.note.find("incomplete") != std::string::npos);
}

TEST_CASE("rho = 1/6 is flagged for rigidity attention") {
  ExampleSpec spec = default_spec(ExampleId::schouten_linear);  // N = 4
  WarpedSolitonData data = build_example(spec);
  auto pts = sample_points(data.domain(), 60, 4, false);
  const ResidualReport rep = verify_soliton(data, pts, Tolerances{});
  CHECK(rep.rho_at_one_sixth);
}

TEST_CASE("fiber-sign implication holds over gallery and fixtures") {
  // whenever rho > 0, sampled S_g >= 0, and the warping attains an interior
  // minimum, the recovered mu must be positive
  struct Instance {
    WarpedSolitonData data;
    std::string name;
  };
  std::vector<Instance> instances;
  for (ExampleId id : all_examples())
    instances.push_back({build_example(default_spec(id)), std::string(example_name(id))});
  instances.push_back({gaussian_shrinker(RhoEinsteinMode{0.4, 0.1}), "gaussian"});

  for (const Instance& inst : instances) {
    const WarpedSolitonData& data = inst.data;
    auto pts = sample_points(data.domain(), 150, 77, false);
    const ResidualReport rep = verify_soliton(data, pts, Tolerances{});
    if (!rep.pass) continue;  // implication quantifies over verified instances
    const RhoEinsteinMode* mode = data.rho_mode();
    if (!mode || !(mode->rho > 0.0)) continue;

    double inf_s = std::numeric_limits<double>::infinity();
    double min_f = std::numeric_limits<double>::infinity();
    std::vector<double> argmin_f;
    for (const auto& p : pts) {
      inf_s = std::min(inf_s, data.warped_scalar(p));
      const double f = data.warping_at(p);
      if (f < min_f) {
        min_f = f;
        argmin_f = p;
      }
    }
    const bool interior_min = data.domain().inner_contains(argmin_f);
    if (inf_s >= 0.0 && interior_min) {
      INFO("instance: ", inst.name);
      CHECK(rep.mu_hat > 0.0);
    }
  }
}
