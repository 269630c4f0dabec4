#include "warpsol/metric.hpp"

#include <cmath>
#include <mutex>

namespace warpsol {

double SymMatrix::sup_norm() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

struct ConformalMetric::BianchiCache {
  std::once_flag once;
  std::vector<Expr> exprs;
  std::vector<CompiledExpr> compiled;
};

ConformalMetric::ConformalMetric(Expr u, Domain domain)
    : u_(std::move(u)), domain_(std::move(domain)), bianchi_(std::make_shared<BianchiCache>()) {
  if (!u_.valid()) throw std::invalid_argument("ConformalMetric: empty exponent");
  const int n = domain_.dimension;

  du_.reserve(n);
  for (int i = 0; i < n; ++i) du_.push_back(differentiate(u_, i));

  // Ric_ij = sum_k d_k Gamma^k_ij - d_j sum_k Gamma^k_ki
  //        + sum_{k,l} Gamma^k_kl Gamma^l_ij - sum_{k,l} Gamma^k_jl Gamma^l_ki
  ricci_exprs_.resize(static_cast<std::size_t>(n) * (n + 1) / 2);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      Expr ric = constant(0.0);
      for (int k = 0; k < n; ++k)
        ric = ric + differentiate(christoffel_expr(k, i, j), k);
      for (int k = 0; k < n; ++k)
        ric = ric - differentiate(christoffel_expr(k, k, i), j);
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          ric = ric + christoffel_expr(k, k, l) * christoffel_expr(l, i, j) -
                christoffel_expr(k, j, l) * christoffel_expr(l, k, i);
      ricci_exprs_[tri(i, j)] = ric;
    }
  }

  Expr trace = constant(0.0);
  for (int i = 0; i < n; ++i) trace = trace + ricci_exprs_[tri(i, i)];
  scalar_ = exp(constant(-2.0) * u_) * trace;

  u_compiled_ = compile(u_);
  du_compiled_.reserve(n);
  for (int i = 0; i < n; ++i) du_compiled_.push_back(compile(du_[i]));
  ricci_compiled_.reserve(ricci_exprs_.size());
  for (const Expr& e : ricci_exprs_) ricci_compiled_.push_back(compile(e));
  scalar_compiled_ = compile(scalar_);
}

Expr ConformalMetric::christoffel_expr(int k, int i, int j) const {
  Expr sum = constant(0.0);
  if (k == i) sum = sum + du_[j];
  if (k == j) sum = sum + du_[i];
  if (i == j) sum = sum - du_[k];
  return sum;
}

const Expr& ConformalMetric::ricci_expr(int i, int j) const {
  return ricci_exprs_[tri(i, j)];
}

Expr ConformalMetric::volume_factor_expr() const {
  return exp(constant(static_cast<double>(dim())) * u_);
}

Expr ConformalMetric::hessian_expr(const Expr& phi, int i, int j) const {
  Expr h = differentiate(differentiate(phi, i), j);
  for (int k = 0; k < dim(); ++k)
    h = h - christoffel_expr(k, i, j) * differentiate(phi, k);
  return h;
}

Expr ConformalMetric::laplacian_expr(const Expr& phi) const {
  Expr trace = constant(0.0);
  for (int i = 0; i < dim(); ++i) trace = trace + hessian_expr(phi, i, i);
  return exp(constant(-2.0) * u_) * trace;
}

Expr ConformalMetric::gradient_norm_sq_expr(const Expr& phi) const {
  Expr sum = constant(0.0);
  for (int i = 0; i < dim(); ++i) {
    Expr d = differentiate(phi, i);
    sum = sum + d * d;
  }
  return exp(constant(-2.0) * u_) * sum;
}

Expr ConformalMetric::gradient_pairing_expr(const Expr& phi, const Expr& psi) const {
  Expr sum = constant(0.0);
  for (int i = 0; i < dim(); ++i)
    sum = sum + differentiate(phi, i) * differentiate(psi, i);
  return exp(constant(-2.0) * u_) * sum;
}

namespace {
thread_local std::vector<double> tl_scratch;
}

double ConformalMetric::exponent_at(std::span<const double> p) const {
  return u_compiled_.eval(p, tl_scratch);
}

double ConformalMetric::conformal_factor(std::span<const double> p) const {
  return std::exp(2.0 * exponent_at(p));
}

Christoffel ConformalMetric::christoffel(std::span<const double> p) const {
  const int n = dim();
  std::vector<double> du(n);
  for (int i = 0; i < n; ++i) du[i] = du_compiled_[i].eval(p, tl_scratch);
  Christoffel gamma(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double v = 0.0;
        if (k == i) v += du[j];
        if (k == j) v += du[i];
        if (i == j) v -= du[k];
        gamma(k, i, j) = v;
      }
  return gamma;
}

SymMatrix ConformalMetric::ricci(std::span<const double> p) const {
  const int n = dim();
  SymMatrix out(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) out(i, j) = ricci_compiled_[tri(i, j)].eval(p, tl_scratch);
  return out;
}

double ConformalMetric::scalar_curvature(std::span<const double> p) const {
  return scalar_compiled_.eval(p, tl_scratch);
}

SymMatrix ConformalMetric::hessian(const Expr& phi, std::span<const double> p) const {
  const int n = dim();
  SymMatrix out(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) out(i, j) = evaluate(hessian_expr(phi, i, j), p);
  return out;
}

double ConformalMetric::laplacian(const Expr& phi, std::span<const double> p) const {
  return evaluate(laplacian_expr(phi), p);
}

double ConformalMetric::gradient_norm_sq(const Expr& phi, std::span<const double> p) const {
  return evaluate(gradient_norm_sq_expr(phi), p);
}

double ConformalMetric::gradient_pairing(const Expr& phi, const Expr& psi,
                                         std::span<const double> p) const {
  return evaluate(gradient_pairing_expr(phi, psi), p);
}

std::vector<double> ConformalMetric::bianchi_residual(std::span<const double> p) const {
  const int n = dim();
  std::call_once(bianchi_->once, [&] {
    // (div Ric)_j = e^{-2u} sum_i [ d_i Ric_ij
    //                              - sum_l Gamma^l_ii Ric_lj
    //                              - sum_l Gamma^l_ij Ric_il ]
    // residual_j  = (div Ric)_j - d_j S / 2
    std::vector<Expr> exprs;
    exprs.reserve(n);
    for (int j = 0; j < n; ++j) {
      Expr div = constant(0.0);
      for (int i = 0; i < n; ++i) {
        div = div + differentiate(ricci_exprs_[tri(i, j)], i);
        for (int l = 0; l < n; ++l) {
          div = div - christoffel_expr(l, i, i) * ricci_exprs_[tri(l, j)];
          div = div - christoffel_expr(l, i, j) * ricci_exprs_[tri(i, l)];
        }
      }
      Expr residual =
          exp(constant(-2.0) * u_) * div - constant(0.5) * differentiate(scalar_, j);
      exprs.push_back(residual);
    }
    bianchi_->compiled.reserve(n);
    for (const Expr& e : exprs) bianchi_->compiled.push_back(compile(e));
    bianchi_->exprs = std::move(exprs);
  });

  std::vector<double> out(n);
  for (int j = 0; j < n; ++j) out[j] = bianchi_->compiled[j].eval(p, tl_scratch);
  return out;
}

void ConformalMetric::geodesic_acceleration(std::span<const double> x,
                                            std::span<const double> v,
                                            std::span<double> acc,
                                            std::vector<double>& scratch) const {
  const int n = dim();
  double v_du = 0.0, v_sq = 0.0;
  for (int i = 0; i < n; ++i) v_sq += v[i] * v[i];
  // acc^k = -2 v^k (v . grad u) + |v|^2 d_k u
  for (int k = 0; k < n; ++k) {
    const double duk = du_compiled_[k].eval(x, scratch);
    acc[k] = v_sq * duk;
    v_du += v[k] * duk;
  }
  for (int k = 0; k < n; ++k) acc[k] -= 2.0 * v[k] * v_du;
}

}  // namespace warpsol
