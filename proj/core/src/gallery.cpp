#include "warpsol/gallery.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace warpsol {

namespace {

constexpr double kDefaultInset = 0.2;

void validate(const ExampleSpec& spec) {
  const int n = spec.n, m = spec.m;
  if (n < 1 || m < 1)
    throw std::invalid_argument("example dimensions must satisfy n, m >= 1");
  switch (spec.id) {
    case ExampleId::hyperbolic_traceless:
    case ExampleId::cosh_traceless:
      break;
    case ExampleId::halfspace_steady:
      if (n < 3)
        throw std::invalid_argument("halfspace_steady requires n >= 3");
      break;
    case ExampleId::schouten_linear: {
      if (n < 3)
        throw std::invalid_argument("schouten_linear requires n >= 3");
      if (!spec.direction.empty()) {
        if (static_cast<int>(spec.direction.size()) != n)
          throw std::invalid_argument(
              "schouten_linear direction must have n components");
        double norm_sq = 0.0;
        for (double a : spec.direction) norm_sq += a * a;
        if (std::abs(norm_sq - 1.0) > 1e-12)
          throw std::invalid_argument(
              "schouten_linear direction must be a unit vector");
      }
      break;
    }
  }
}

bool is_halfspace(ExampleId id) {
  return id == ExampleId::hyperbolic_traceless ||
         id == ExampleId::halfspace_steady;
}

// xi = sum a_i x_i for schouten_linear; defaults to the last coordinate.
Expr linear_form(const ExampleSpec& spec) {
  Expr xi = constant(0.0);
  if (spec.direction.empty()) return variable(spec.n - 1);
  for (int i = 0; i < spec.n; ++i)
    xi = xi + constant(spec.direction[i]) * variable(i);
  return xi;
}

}  // namespace

std::string_view example_name(ExampleId id) {
  switch (id) {
    case ExampleId::hyperbolic_traceless: return "hyperbolic_traceless";
    case ExampleId::cosh_traceless: return "cosh_traceless";
    case ExampleId::halfspace_steady: return "halfspace_steady";
    case ExampleId::schouten_linear: return "schouten_linear";
  }
  throw std::invalid_argument("unknown example id");
}

std::optional<ExampleId> example_from_name(std::string_view name) {
  for (ExampleId id : all_examples())
    if (example_name(id) == name) return id;
  return std::nullopt;
}

std::vector<ExampleId> all_examples() {
  return {ExampleId::hyperbolic_traceless, ExampleId::cosh_traceless,
          ExampleId::halfspace_steady, ExampleId::schouten_linear};
}

ExampleSpec default_spec(ExampleId id) {
  ExampleSpec spec;
  spec.id = id;
  switch (id) {
    case ExampleId::hyperbolic_traceless:
    case ExampleId::cosh_traceless:
      spec.n = 1;
      spec.m = 2;
      break;
    case ExampleId::halfspace_steady:
      spec.n = 3;
      spec.m = 1;
      break;
    case ExampleId::schouten_linear:
      spec.n = 3;
      spec.m = 1;
      spec.c = 0.0;
      break;
  }
  return spec;
}

ExampleConstants expected_constants(const ExampleSpec& spec) {
  validate(spec);
  const double n = spec.n, m = spec.m;
  ExampleConstants k;
  switch (spec.id) {
    case ExampleId::hyperbolic_traceless:
    case ExampleId::cosh_traceless:
      k.mu = 0.0;
      // The proportionality constant alpha exists only at (n, m) = (1, 2),
      // where the family becomes a traceless Ricci soliton (rho = 1/N).
      if (spec.n == 1 && spec.m == 2) {
        k.alpha = -1.0;
        k.rho_claim = true;
        k.rho = 1.0 / 3.0;
        k.lambda =
            spec.id == ExampleId::cosh_traceless ? 1.0 / 3.0 : 0.0;
      }
      break;
    case ExampleId::halfspace_steady:
      k.mu = (5.0 - m - 4.0 * n) / 3.0;
      k.alpha = -(17.0 + 3.0 * m * m - 18.0 * n + 4.0 * n * n +
                  2.0 * m * (-8.0 + 5.0 * n)) /
                (2.0 * (4.0 * n + m - 5.0));
      // The tabulated scalar formula and the rho = 1/(n+1-alpha) chain both
      // drop the fiber curvature contribution (m-1) mu / f^2, which is
      // nonzero here whenever m >= 2.
      k.scalar_formula_exact = spec.m == 1;
      if (spec.m == 1) {
        k.rho_claim = true;
        k.rho = 1.0 / (n + 1.0 - k.alpha);  // = 2/(3n+1)
        k.lambda = 0.0;
      }
      break;
    case ExampleId::schouten_linear:
      k.mu = 0.0;
      k.alpha = -2.0 * m - n + 3.0;
      k.rho_claim = true;
      k.rho = 1.0 / (2.0 * (m + n - 1.0));
      k.lambda = spec.c;
      break;
  }
  return k;
}

Domain default_domain(const ExampleSpec& spec) {
  validate(spec);
  std::vector<double> lower(static_cast<std::size_t>(spec.n), -3.0);
  std::vector<double> upper(static_cast<std::size_t>(spec.n), 3.0);
  if (is_halfspace(spec.id)) {
    lower.back() = 0.2;
    upper.back() = 5.0;
  }
  return Domain(spec.n, std::move(lower), std::move(upper), kDefaultInset);
}

WarpedSolitonData build_example(const ExampleSpec& spec) {
  validate(spec);
  const ExampleConstants k = expected_constants(spec);
  const double n = spec.n, m = spec.m;
  const Domain domain = spec.domain ? *spec.domain : default_domain(spec);
  const Expr xn = variable(spec.n - 1);

  Expr u, f, phi, lambda;
  switch (spec.id) {
    case ExampleId::hyperbolic_traceless: {
      u = log(coth(xn));
      f = coth(xn);
      phi = constant(2.0 / 3.0 * (m + n - 2.0)) * log(cosh(xn));
      lambda = constant(-1.0 / 3.0) *
               (constant(2.0 * (m + n - 2.0)) +
                constant(m + n + 1.0) * cosh(constant(2.0) * xn)) /
               pow(cosh(xn), 4.0);
      break;
    }
    case ExampleId::cosh_traceless: {
      u = log(cosh(xn));
      f = cosh(xn);
      phi = constant((m + n - 2.0) / 12.0) *
            (constant(8.0) * log(cosh(xn)) + cosh(constant(2.0) * xn));
      lambda = (constant(m + n - 2.0) * pow(sinh(xn), 4.0) - constant(3.0)) /
               (constant(3.0) * pow(cosh(xn), 4.0));
      break;
    }
    case ExampleId::halfspace_steady: {
      u = constant(-2.0) * log(xn);
      f = pow(xn, -1.0);
      phi = constant(2.0 * (2.0 - m - n) / 3.0) * log(xn);
      lambda = constant(2.0 * (5.0 - m - 4.0 * n) / 3.0) * xn * xn;
      break;
    }
    case ExampleId::schouten_linear: {
      const Expr xi = linear_form(spec);
      u = xi;
      f = exp(xi);
      phi = constant(spec.c / 2.0) * exp(constant(2.0) * xi) -
            constant((2.0 - m - n) / 2.0) * xi;
      lambda = constant(spec.c) +
               constant((2.0 - m - n) / 2.0) * exp(constant(-2.0) * xi);
      break;
    }
  }

  SolitonMode mode;
  if (k.rho_claim && !spec.explicit_lambda)
    mode = RhoEinsteinMode{k.lambda, k.rho};
  else
    mode = ExplicitLambdaMode{lambda};
  return WarpedSolitonData(ConformalMetric(u, domain), f, phi,
                           std::move(mode), spec.m, k.mu);
}

Expr closed_form_scalar_expr(const ExampleSpec& spec) {
  validate(spec);
  const double n = spec.n, m = spec.m;
  const Expr xn = variable(spec.n - 1);
  switch (spec.id) {
    case ExampleId::hyperbolic_traceless:
      return constant(-(m + n - 1.0)) *
             (constant(m + n - 2.0) +
              constant(2.0) * cosh(constant(2.0) * xn)) /
             pow(cosh(xn), 4.0);
    case ExampleId::cosh_traceless:
      return constant(-(m + n - 1.0)) *
             (constant(6.0 - m - n) +
              constant(m + n - 2.0) * cosh(constant(2.0) * xn)) /
             (constant(2.0) * pow(cosh(xn), 4.0));
    case ExampleId::halfspace_steady:
      return constant(-(7.0 + 3.0 * m * m - 20.0 * n + 12.0 * n * n +
                        2.0 * m * (-7.0 + 6.0 * n)) /
                      3.0) *
             xn * xn;
    case ExampleId::schouten_linear:
      return constant(-(m + n - 2.0) * (m + n - 1.0)) *
             exp(constant(-2.0) * linear_form(spec));
  }
  throw std::invalid_argument("unknown example id");
}

double closed_form_scalar(const ExampleSpec& spec, std::span<const double> p) {
  return evaluate(closed_form_scalar_expr(spec), p);
}

}  // namespace warpsol
