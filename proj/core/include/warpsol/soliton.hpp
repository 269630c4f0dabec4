#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "warpsol/metric.hpp"

// Verification of gradient rho-Einstein soliton structures on warped
// products B^n x_f F^m with conformally flat base and Einstein fiber
// (Ric_F = mu g_F, so S_F = m*mu). All equations live on the base:
//
//   base      Ric_B + Hess(phi) - (m/f) Hess(f) = Lambda g_B
//   vertical  mu = Lambda f^2 + f Lap(f) + (m-1)|grad f|^2 - f <grad phi, grad f>
//   closure   -2 Lambda dphi + d((2-m-n) Lambda + |grad phi|^2 - Lap(phi)
//                                - (m/f)<grad phi, grad f>) = 0
//   scalar    S_g = S_B - (2m/f) Lap(f) + m mu / f^2 - m(m-1)|grad f|^2 / f^2
//
// In (lambda, rho) mode Lambda is the function lambda + rho S_g; in
// explicit mode Lambda is supplied as an expression and the soliton
// constants are recovered rather than assumed.

namespace warpsol {

// Lambda = lambda + rho * S_g with constants; rho must be nonzero.
struct RhoEinsteinMode {
  double lambda = 0.0;
  double rho = 0.0;
};

// Lambda supplied as an expression over the base coordinates.
struct ExplicitLambdaMode {
  Expr lambda_fn;
};

using SolitonMode = std::variant<ExplicitLambdaMode, RhoEinsteinMode>;

struct Tolerances {
  double residual = 1e-6;   // sup-norm gate for every equation residual
  double constancy = 1e-8;  // spread gate for recovered constants
};

struct EquationStats {
  double sup = 0.0;
  double mean = 0.0;
};

// Least-squares-free slope recovery for alpha grad(Lambda) = grad(H):
// median of per-component ratios dH_j / dLambda_j over the sample,
// restricted to components with |dLambda_j| >= threshold.
struct AlphaEstimate {
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double spread = std::numeric_limits<double>::quiet_NaN();  // max |ratio - median|
  int components_used = 0;
  bool degenerate = false;  // grad(Lambda) below threshold everywhere
};

struct SolitonConstants {
  double rho = std::numeric_limits<double>::quiet_NaN();
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double lambda_spread = std::numeric_limits<double>::quiet_NaN();
  bool valid = false;
  std::string note;  // reason when invalid (degenerate / alpha == n+1)
};

struct ResidualReport {
  int points = 0;
  EquationStats base_eq;        // soliton equation on the base
  EquationStats integrability;  // closure one-form
  EquationStats vertical;       // declared mu vs pointwise Einstein constant
  EquationStats trace_base;     // trace of the base equation
  EquationStats trace_warped;   // warped scalar-curvature identity
  bool has_catino = false;
  EquationStats catino;  // Bochner-type identity, (lambda, rho) mode only
  double mu_hat = std::numeric_limits<double>::quiet_NaN();
  double mu_spread = std::numeric_limits<double>::quiet_NaN();
  AlphaEstimate alpha;
  SolitonConstants constants;
  bool rho_at_one_sixth = false;  // |rho -+ 1/6| < 1e-9, rigidity-sensitive value
  bool equations_pass = false;
  bool mu_constant = false;
  bool pass = false;
  Tolerances tol;
};

struct ScalarBoundReport {
  enum class Flag { consistent, violated, out_of_range };
  Flag flag = Flag::out_of_range;
  double rho = 0.0;
  double lambda = 0.0;
  double bound = 0.0;        // min{0, lambda N / (1 - rho N)}
  double sampled_inf = 0.0;  // inf of S_g over the sample
  std::string note;
};

class WarpedSolitonData {
public:
  // base: conformal base metric; warping f > 0 and potential phi are
  // expressions over the base coordinates; fiber_dim = m >= 1; fiber_mu
  // is the Einstein constant of the fiber. Every derived quantity is
  // assembled symbolically here and compiled once.
  WarpedSolitonData(ConformalMetric base, Expr warping, Expr potential,
                    SolitonMode mode, int fiber_dim, double fiber_mu);

  const ConformalMetric& base() const noexcept { return base_; }
  const Domain& domain() const noexcept { return base_.domain(); }
  int base_dim() const noexcept { return base_.dim(); }
  int fiber_dim() const noexcept { return m_; }
  int total_dim() const noexcept { return base_.dim() + m_; }
  double fiber_mu() const noexcept { return mu_; }
  const Expr& warping() const noexcept { return f_; }
  const Expr& potential() const noexcept { return phi_; }
  const Expr& lambda_expr() const noexcept { return lambda_; }
  const Expr& warped_scalar_expr() const noexcept { return s_g_; }

  bool is_rho_einstein() const noexcept;
  const RhoEinsteinMode* rho_mode() const noexcept;  // nullptr in explicit mode

  double warping_at(std::span<const double> p) const;
  double potential_at(std::span<const double> p) const;
  double lambda_at(std::span<const double> p) const;
  double warped_scalar(std::span<const double> p) const;

  // Residual evaluators; see the header comment for the equations.
  SymMatrix base_residual(std::span<const double> p) const;
  std::vector<double> integrability_residual(std::span<const double> p) const;
  double einstein_constant(std::span<const double> p) const;  // eq RHS, should == mu
  double vertical_residual(std::span<const double> p) const;  // mu - einstein_constant
  // {base-trace residual, warped-scalar identity residual}
  std::pair<double, double> trace_identity_residuals(std::span<const double> p) const;
  // (rho(1-N) + 1/2) Lap_g S - <grad S, grad phi>_g / 2 - (lambda S + rho S^2 - |Ric_g|^2)
  // lifted to the base; throws std::invalid_argument in explicit mode.
  double catino_identity_residual(std::span<const double> p) const;

  // Coordinate gradients feeding the alpha estimate.
  std::vector<double> lambda_gradient(std::span<const double> p) const;
  std::vector<double> alpha_rhs_gradient(std::span<const double> p) const;

private:
  ConformalMetric base_;
  Expr f_;
  Expr phi_;
  SolitonMode mode_;
  int m_;
  double mu_;

  Expr lambda_;
  Expr s_g_;

  CompiledExpr f_c_, phi_c_, lambda_c_, s_g_c_;
  std::vector<CompiledExpr> base_residual_c_;  // upper triangle
  std::vector<CompiledExpr> integrability_c_;
  CompiledExpr einstein_c_;
  CompiledExpr trace_base_c_, trace_warped_c_;
  CompiledExpr catino_c_;  // only in (lambda, rho) mode
  std::vector<CompiledExpr> dlambda_c_, dalpha_rhs_c_;

  std::size_t tri(int i, int j) const {
    if (i > j) std::swap(i, j);
    return static_cast<std::size_t>(i) * (2 * base_.dim() - i - 1) / 2 + j;
  }
};

// Threshold below which a Lambda-gradient component is excluded from the
// alpha ratio (and the estimate degenerates if nothing survives).
inline constexpr double kAlphaGradientThreshold = 1e-8;

AlphaEstimate estimate_alpha(const WarpedSolitonData& data,
                             std::span<const std::vector<double>> sample,
                             double gradient_threshold = kAlphaGradientThreshold);

// rho_hat = 1/(n+1-alpha_hat), lambda_hat = mean of Lambda - rho_hat S_g.
// Invalid when the alpha estimate degenerates (Ricci-soliton regime) or
// alpha_hat == n+1 (constant-scalar case).
SolitonConstants derive_soliton_constants(const WarpedSolitonData& data,
                                          std::span<const std::vector<double>> sample);

// Lower-bound check S >= min{0, lambda N/(1 - rho N)} for
// 0 < rho <= 1/(2(N-1)); outside that range the flag is out_of_range.
// A violation on a sample is reported together with the note that the
// bound presumes geodesic completeness. (lambda, rho) mode only.
ScalarBoundReport scalar_bound_report(const WarpedSolitonData& data,
                                      std::span<const std::vector<double>> sample,
                                      double tolerance = 1e-9);

// Full verification pass over a sample: every residual, recovered
// constants, and the verdict. Throws DomainError naming the offending
// point if the warping function fails to be positive somewhere.
ResidualReport verify_soliton(const WarpedSolitonData& data,
                              std::span<const std::vector<double>> sample,
                              const Tolerances& tol = {});

}  // namespace warpsol
