#include "warpsol/soliton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "warpsol/parallel.hpp"

namespace warpsol {

namespace {

thread_local std::vector<double> tl_scratch;

std::vector<Expr> gradient_exprs(const Expr& field, int n) {
  std::vector<Expr> d;
  d.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) d.push_back(differentiate(field, i));
  return d;
}

// Covariant Hessian entry from precomputed first derivatives, so every
// consumer of dF shares the same subtrees.
Expr hessian_entry(const ConformalMetric& g, const std::vector<Expr>& df,
                   int i, int j) {
  Expr h = differentiate(df[static_cast<std::size_t>(j)], i);
  for (int k = 0; k < g.dim(); ++k)
    h = h - g.christoffel_expr(k, i, j) * df[static_cast<std::size_t>(k)];
  return h;
}

Expr euclidean_dot(const std::vector<Expr>& a, const std::vector<Expr>& b) {
  Expr s = constant(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) s = s + a[i] * b[i];
  return s;
}

std::string format_point(std::span<const double> p) {
  std::string out = "(";
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(p[i]);
  }
  out += ")";
  return out;
}

}  // namespace

WarpedSolitonData::WarpedSolitonData(ConformalMetric base, Expr warping,
                                     Expr potential, SolitonMode mode,
                                     int fiber_dim, double fiber_mu)
    : base_(std::move(base)),
      f_(std::move(warping)),
      phi_(std::move(potential)),
      mode_(std::move(mode)),
      m_(fiber_dim),
      mu_(fiber_mu) {
  if (m_ < 1) throw std::invalid_argument("fiber dimension must be at least 1");
  if (!f_.valid() || !phi_.valid())
    throw std::invalid_argument("warping and potential must be nonempty expressions");
  if (const auto* re = std::get_if<RhoEinsteinMode>(&mode_)) {
    if (re->rho == 0.0)
      throw std::invalid_argument(
          "rho must be nonzero; rho = 0 is the Ricci-soliton regime");
    if (base_.dim() + m_ < 3)
      throw std::invalid_argument(
          "(lambda, rho) mode needs total dimension n + m >= 3");
  }
  if (const auto* ex = std::get_if<ExplicitLambdaMode>(&mode_))
    if (!ex->lambda_fn.valid())
      throw std::invalid_argument("explicit mode requires a Lambda expression");

  const int n = base_.dim();
  const double md = static_cast<double>(m_);
  const Expr u = base_.exponent();
  const Expr e2u = exp(constant(2.0) * u);
  const Expr e2u_inv = exp(constant(-2.0) * u);

  const std::vector<Expr> df = gradient_exprs(f_, n);
  const std::vector<Expr> dphi = gradient_exprs(phi_, n);

  const std::size_t tri_count = static_cast<std::size_t>(n) * (n + 1) / 2;
  std::vector<Expr> hess_f(tri_count), hess_phi(tri_count);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      hess_f[tri(i, j)] = hessian_entry(base_, df, i, j);
      hess_phi[tri(i, j)] = hessian_entry(base_, dphi, i, j);
    }

  Expr lap_f0 = constant(0.0), lap_phi0 = constant(0.0);
  for (int i = 0; i < n; ++i) {
    lap_f0 = lap_f0 + hess_f[tri(i, i)];
    lap_phi0 = lap_phi0 + hess_phi[tri(i, i)];
  }
  const Expr lap_f = e2u_inv * lap_f0;
  const Expr lap_phi = e2u_inv * lap_phi0;
  const Expr grad_f_sq = e2u_inv * euclidean_dot(df, df);
  const Expr grad_phi_sq = e2u_inv * euclidean_dot(dphi, dphi);
  const Expr pair_phi_f = e2u_inv * euclidean_dot(dphi, df);
  const Expr f2 = f_ * f_;

  s_g_ = base_.scalar_expr() - constant(2.0 * md) * lap_f / f_ +
         constant(md * mu_) / f2 -
         constant(md * (md - 1.0)) * grad_f_sq / f2;

  if (const auto* re = std::get_if<RhoEinsteinMode>(&mode_))
    lambda_ = constant(re->lambda) + constant(re->rho) * s_g_;
  else
    lambda_ = std::get<ExplicitLambdaMode>(mode_).lambda_fn;

  f_c_ = compile(f_);
  phi_c_ = compile(phi_);
  lambda_c_ = compile(lambda_);
  s_g_c_ = compile(s_g_);

  base_residual_c_.reserve(tri_count);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      Expr r = base_.ricci_expr(i, j) + hess_phi[tri(i, j)] -
               constant(md) * hess_f[tri(i, j)] / f_;
      if (i == j) r = r - lambda_ * e2u;
      base_residual_c_.push_back(compile(r));
    }

  const Expr closure = constant(2.0 - md - n) * lambda_ + grad_phi_sq -
                       lap_phi - constant(md) * pair_phi_f / f_;
  integrability_c_.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    Expr r = constant(-2.0) * lambda_ * dphi[static_cast<std::size_t>(j)] +
             differentiate(closure, j);
    integrability_c_.push_back(compile(r));
  }

  const Expr einstein = lambda_ * f2 + f_ * lap_f +
                        constant(md - 1.0) * grad_f_sq - f_ * pair_phi_f;
  einstein_c_ = compile(einstein);

  trace_base_c_ = compile(base_.scalar_expr() -
                          (constant(static_cast<double>(n)) * lambda_ -
                           lap_phi + constant(md) * lap_f / f_));
  // Warped trace identity; the (m-1) mu / f^2 term carries the fiber
  // scalar curvature S_F = m mu and vanishes only when (m-1) mu = 0.
  trace_warped_c_ = compile(
      s_g_ - (constant(n + 1.0) * lambda_ - (lap_phi + pair_phi_f / f_) -
              constant(md - 1.0) *
                  (lap_f / f_ + constant(md - 1.0) * grad_f_sq / f2) +
              constant((md - 1.0) * mu_) / f2));

  // The scalar whose gradient is alpha * grad(Lambda) on solutions.
  const Expr alpha_rhs =
      lap_phi + pair_phi_f / f_ +
      constant(md - 1.0) * (lap_f / f_ + constant(md - 1.0) * grad_f_sq / f2);
  dlambda_c_.reserve(static_cast<std::size_t>(n));
  dalpha_rhs_c_.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    dlambda_c_.push_back(compile(differentiate(lambda_, j)));
    dalpha_rhs_c_.push_back(compile(differentiate(alpha_rhs, j)));
  }

  if (const auto* re = std::get_if<RhoEinsteinMode>(&mode_)) {
    const double nd = static_cast<double>(n) + md;
    const std::vector<Expr> ds = gradient_exprs(s_g_, n);

    Expr lap_s0 = constant(0.0);
    for (int i = 0; i < n; ++i) lap_s0 = lap_s0 + hessian_entry(base_, ds, i, i);
    // Laplacian of a fiber-independent function on the warped product.
    const Expr lap_g_s = e2u_inv * lap_s0 +
                         constant(md) * (e2u_inv * euclidean_dot(df, ds)) / f_;
    const Expr pair_phi_s = e2u_inv * euclidean_dot(dphi, ds);

    // |Ric_g|^2 = |Ric_B - (m/f) Hess f|^2 + m nu^2 / f^4 with
    // nu = mu - f Lap f - (m-1)|grad f|^2 the vertical Ricci eigenvalue.
    Expr t_sq = constant(0.0);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        Expr t = base_.ricci_expr(i, j) -
                 constant(md) * hess_f[tri(i, j)] / f_;
        Expr sq = t * t;
        t_sq = t_sq + (i == j ? sq : constant(2.0) * sq);
      }
    const Expr nu =
        constant(mu_) - f_ * lap_f - constant(md - 1.0) * grad_f_sq;
    const Expr ric_sq = exp(constant(-4.0) * u) * t_sq +
                        constant(md) * (nu * nu) / (f2 * f2);

    const Expr catino =
        constant(re->rho * (1.0 - nd) + 0.5) * lap_g_s -
        constant(0.5) * pair_phi_s -
        (constant(re->lambda) * s_g_ + constant(re->rho) * s_g_ * s_g_ -
         ric_sq);
    catino_c_ = compile(catino);
  }
}

bool WarpedSolitonData::is_rho_einstein() const noexcept {
  return std::holds_alternative<RhoEinsteinMode>(mode_);
}

const RhoEinsteinMode* WarpedSolitonData::rho_mode() const noexcept {
  return std::get_if<RhoEinsteinMode>(&mode_);
}

double WarpedSolitonData::warping_at(std::span<const double> p) const {
  return f_c_.eval(p, tl_scratch);
}

double WarpedSolitonData::potential_at(std::span<const double> p) const {
  return phi_c_.eval(p, tl_scratch);
}

double WarpedSolitonData::lambda_at(std::span<const double> p) const {
  return lambda_c_.eval(p, tl_scratch);
}

double WarpedSolitonData::warped_scalar(std::span<const double> p) const {
  return s_g_c_.eval(p, tl_scratch);
}

SymMatrix WarpedSolitonData::base_residual(std::span<const double> p) const {
  const int n = base_.dim();
  SymMatrix out(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      out(i, j) = base_residual_c_[tri(i, j)].eval(p, tl_scratch);
  return out;
}

std::vector<double> WarpedSolitonData::integrability_residual(
    std::span<const double> p) const {
  std::vector<double> out(integrability_c_.size());
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = integrability_c_[j].eval(p, tl_scratch);
  return out;
}

double WarpedSolitonData::einstein_constant(std::span<const double> p) const {
  return einstein_c_.eval(p, tl_scratch);
}

double WarpedSolitonData::vertical_residual(std::span<const double> p) const {
  return mu_ - einstein_c_.eval(p, tl_scratch);
}

std::pair<double, double> WarpedSolitonData::trace_identity_residuals(
    std::span<const double> p) const {
  return {trace_base_c_.eval(p, tl_scratch),
          trace_warped_c_.eval(p, tl_scratch)};
}

double WarpedSolitonData::catino_identity_residual(
    std::span<const double> p) const {
  if (!catino_c_.valid())
    throw std::invalid_argument(
        "the Catino identity requires (lambda, rho) mode");
  return catino_c_.eval(p, tl_scratch);
}

std::vector<double> WarpedSolitonData::lambda_gradient(
    std::span<const double> p) const {
  std::vector<double> out(dlambda_c_.size());
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = dlambda_c_[j].eval(p, tl_scratch);
  return out;
}

std::vector<double> WarpedSolitonData::alpha_rhs_gradient(
    std::span<const double> p) const {
  std::vector<double> out(dalpha_rhs_c_.size());
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = dalpha_rhs_c_[j].eval(p, tl_scratch);
  return out;
}

AlphaEstimate estimate_alpha(const WarpedSolitonData& data,
                             std::span<const std::vector<double>> sample,
                             double gradient_threshold) {
  std::vector<double> ratios;
  for (const auto& p : sample) {
    const auto dl = data.lambda_gradient(p);
    const auto dh = data.alpha_rhs_gradient(p);
    for (std::size_t j = 0; j < dl.size(); ++j)
      if (std::abs(dl[j]) >= gradient_threshold) ratios.push_back(dh[j] / dl[j]);
  }
  AlphaEstimate est;
  est.components_used = static_cast<int>(ratios.size());
  if (ratios.empty()) {
    est.degenerate = true;
    return est;
  }
  std::sort(ratios.begin(), ratios.end());
  const std::size_t k = ratios.size();
  est.alpha = (k % 2 == 1) ? ratios[k / 2]
                           : 0.5 * (ratios[k / 2 - 1] + ratios[k / 2]);
  est.spread = std::max(std::abs(ratios.front() - est.alpha),
                        std::abs(ratios.back() - est.alpha));
  return est;
}

SolitonConstants derive_soliton_constants(
    const WarpedSolitonData& data, std::span<const std::vector<double>> sample) {
  SolitonConstants out;
  const AlphaEstimate est = estimate_alpha(data, sample);
  if (est.degenerate) {
    out.note =
        "Ricci-soliton regime: grad(Lambda) vanishes on the sample, rho is "
        "unidentifiable";
    return out;
  }
  const double denom = static_cast<double>(data.base_dim()) + 1.0 - est.alpha;
  if (std::abs(denom) < 1e-9) {
    out.note = "alpha == n+1: constant scalar curvature, rho is undefined";
    return out;
  }
  out.rho = 1.0 / denom;
  double sum = 0.0;
  std::vector<double> vals;
  vals.reserve(sample.size());
  for (const auto& p : sample) {
    const double v = data.lambda_at(p) - out.rho * data.warped_scalar(p);
    vals.push_back(v);
    sum += v;
  }
  out.lambda = sum / static_cast<double>(vals.size());
  double spread = 0.0;
  for (double v : vals) spread = std::max(spread, std::abs(v - out.lambda));
  out.lambda_spread = spread;
  out.valid = true;
  return out;
}

ScalarBoundReport scalar_bound_report(const WarpedSolitonData& data,
                                      std::span<const std::vector<double>> sample,
                                      double tolerance) {
  const RhoEinsteinMode* re = data.rho_mode();
  if (!re)
    throw std::invalid_argument(
        "the scalar curvature bound requires (lambda, rho) mode");
  if (sample.empty()) throw std::invalid_argument("empty sample");

  ScalarBoundReport rep;
  rep.rho = re->rho;
  rep.lambda = re->lambda;
  rep.sampled_inf = std::numeric_limits<double>::infinity();
  for (const auto& p : sample)
    rep.sampled_inf = std::min(rep.sampled_inf, data.warped_scalar(p));

  const double nd = static_cast<double>(data.total_dim());
  // Admissible window (0, 1/(2(N-1))]; the right endpoint is the Schouten
  // value and is included.
  if (!(re->rho > 0.0 && re->rho <= 1.0 / (2.0 * (nd - 1.0)) + tolerance)) {
    rep.flag = ScalarBoundReport::Flag::out_of_range;
    rep.bound = std::numeric_limits<double>::quiet_NaN();
    rep.note = "rho lies outside (0, 1/(2(N-1))]; no lower bound is asserted";
    return rep;
  }

  if (re->lambda == 0.0) {
    rep.bound = 0.0;
  } else {
    const double den = 1.0 - re->rho * nd;
    rep.bound = std::min(0.0, re->lambda * nd / den);
  }
  if (rep.sampled_inf < rep.bound - tolerance) {
    rep.flag = ScalarBoundReport::Flag::violated;
    rep.note =
        "sampled scalar curvature drops below the bound; the bound presumes "
        "geodesic completeness, so this points at an incomplete metric";
  } else {
    rep.flag = ScalarBoundReport::Flag::consistent;
    rep.note = "sampled scalar curvature respects the bound";
  }
  return rep;
}

ResidualReport verify_soliton(const WarpedSolitonData& data,
                              std::span<const std::vector<double>> sample,
                              const Tolerances& tol) {
  if (sample.empty()) throw std::invalid_argument("empty sample");

  struct Row {
    double base, integ, vert, tb, tw, cat, mu_pt;
  };
  const bool rho_mode = data.is_rho_einstein();
  std::vector<Row> rows(sample.size());
  parallel_for(sample.size(), [&](std::size_t i) {
    const auto& p = sample[i];
    const double fv = data.warping_at(p);
    if (!(fv > 0.0))
      throw DomainError("warping function is not positive at " +
                        format_point(p));
    Row& r = rows[i];
    r.base = data.base_residual(p).sup_norm();
    double integ = 0.0;
    for (double v : data.integrability_residual(p))
      integ = std::max(integ, std::abs(v));
    r.integ = integ;
    r.mu_pt = data.einstein_constant(p);
    r.vert = data.fiber_mu() - r.mu_pt;
    const auto [tb, tw] = data.trace_identity_residuals(p);
    r.tb = tb;
    r.tw = tw;
    r.cat = rho_mode ? data.catino_identity_residual(p) : 0.0;
  });

  ResidualReport rep;
  rep.tol = tol;
  rep.points = static_cast<int>(sample.size());
  rep.has_catino = rho_mode;
  const auto fold = [&](EquationStats& s, double v) {
    v = std::abs(v);
    s.sup = std::max(s.sup, v);
    s.mean += v / static_cast<double>(rows.size());
  };
  double mu_sum = 0.0;
  for (const Row& r : rows) {
    fold(rep.base_eq, r.base);
    fold(rep.integrability, r.integ);
    fold(rep.vertical, r.vert);
    fold(rep.trace_base, r.tb);
    fold(rep.trace_warped, r.tw);
    if (rho_mode) fold(rep.catino, r.cat);
    mu_sum += r.mu_pt;
  }
  rep.mu_hat = mu_sum / static_cast<double>(rows.size());
  rep.mu_spread = 0.0;
  for (const Row& r : rows)
    rep.mu_spread = std::max(rep.mu_spread, std::abs(r.mu_pt - rep.mu_hat));

  rep.alpha = estimate_alpha(data, sample);
  rep.constants = derive_soliton_constants(data, sample);

  double rho_for_flag = std::numeric_limits<double>::quiet_NaN();
  if (const auto* re = data.rho_mode())
    rho_for_flag = re->rho;
  else if (rep.constants.valid)
    rho_for_flag = rep.constants.rho;
  rep.rho_at_one_sixth = std::isfinite(rho_for_flag) &&
                         (std::abs(rho_for_flag - 1.0 / 6.0) < 1e-9 ||
                          std::abs(rho_for_flag + 1.0 / 6.0) < 1e-9);

  rep.equations_pass =
      rep.base_eq.sup <= tol.residual && rep.integrability.sup <= tol.residual &&
      rep.vertical.sup <= tol.residual && rep.trace_base.sup <= tol.residual &&
      rep.trace_warped.sup <= tol.residual &&
      (!rho_mode || rep.catino.sup <= tol.residual);
  rep.mu_constant = rep.mu_spread <= tol.constancy;
  rep.pass = rep.equations_pass && rep.mu_constant;
  return rep;
}

}  // namespace warpsol
