#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "warpsol/soliton.hpp"

// Ready-made warped soliton data sets on conformally flat bases, each
// with a closed-form scalar curvature for cross-checking:
//
//   hyperbolic_traceless  half-space x_n > 0, g_B = coth^2(x_n) delta,
//                         f = coth(x_n); steady traceless Ricci soliton
//                         at (n, m) = (1, 2) with (lambda, rho) = (0, 1/3)
//   cosh_traceless        g_B = cosh^2(x_n) delta on R^n, f = cosh(x_n);
//                         shrinking traceless soliton at (1, 2) with
//                         (lambda, rho) = (1/3, 1/3)
//   halfspace_steady      half-space, g_B = x_n^{-4} delta, f = 1/x_n;
//                         steady soliton with rho = 2/(3n+1) at m = 1
//   schouten_linear       g_B = e^{2 xi} delta with xi a unit linear form,
//                         f = e^{xi}; Schouten soliton rho = 1/(2(m+n-1)),
//                         lambda = c, incomplete along descending rays
//
// Each family keeps (n, m) free where the construction equations hold for
// general parameters; the (lambda, rho) structure is attached only where
// the constants work out (see expected_constants).

namespace warpsol {

enum class ExampleId {
  hyperbolic_traceless,
  cosh_traceless,
  halfspace_steady,
  schouten_linear,
};

struct ExampleSpec {
  ExampleId id = ExampleId::hyperbolic_traceless;
  int n = 0;  // 0 picks the per-example default
  int m = 0;
  double c = 0.0;                 // schouten_linear soliton constant
  std::vector<double> direction;  // schouten_linear unit covector; empty = e_n
  bool explicit_lambda = false;   // keep Lambda as an expression even when
                                  // the (lambda, rho) structure applies
  std::optional<Domain> domain;   // override the default box
};

struct ExampleConstants {
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double mu = 0.0;
  bool rho_claim = false;  // (lambda, rho) structure holds at these parameters
  double rho = std::numeric_limits<double>::quiet_NaN();
  double lambda = std::numeric_limits<double>::quiet_NaN();
  // closed_form_scalar agrees with warped_scalar at these parameters; the
  // tabulated halfspace_steady formula drops the fiber curvature term and
  // is exact only at m = 1.
  bool scalar_formula_exact = true;
};

// Stable CLI identifiers.
std::string_view example_name(ExampleId id);
std::optional<ExampleId> example_from_name(std::string_view name);
std::vector<ExampleId> all_examples();

// Spec with the per-example default parameters filled in.
ExampleSpec default_spec(ExampleId id);

// Constants implied by the parameters (validates them first).
ExampleConstants expected_constants(const ExampleSpec& spec);

// Default sampling box: last axis [0.2, 5] on half-space families,
// [-3, 3] elsewhere, inset 0.2 from every edge.
Domain default_domain(const ExampleSpec& spec);

// Fully populated soliton data. When the (lambda, rho) structure applies
// (and explicit_lambda is not set) the data is built in (lambda, rho)
// mode; otherwise Lambda is attached as an expression.
WarpedSolitonData build_example(const ExampleSpec& spec);

// The tabulated closed-form warped scalar curvature for the family.
Expr closed_form_scalar_expr(const ExampleSpec& spec);
double closed_form_scalar(const ExampleSpec& spec, std::span<const double> p);

}  // namespace warpsol
