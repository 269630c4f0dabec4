#pragma once

#include <span>
#include <vector>

#include "warpsol/expr.hpp"

// Curvature of conformally flat metrics g = e^{2u} delta on a box in R^n.
//
// Christoffel symbols come from the closed conformal formula
//   Gamma^k_ij = d_i u delta_kj + d_j u delta_ki - d_k u delta_ij,
// and everything second-order (Ricci, scalar curvature, the contracted
// Bianchi residual) is assembled symbolically from Gamma and its exact
// derivatives, so the only approximation anywhere is double rounding.

namespace warpsol {

// Dense symmetric matrix with upper-triangle storage.
class SymMatrix {
public:
  SymMatrix() = default;
  explicit SymMatrix(int n) : n_(n), data_(static_cast<std::size_t>(n) * (n + 1) / 2) {}

  int dim() const noexcept { return n_; }
  double& operator()(int i, int j) { return data_[tri(i, j)]; }
  double operator()(int i, int j) const { return data_[tri(i, j)]; }

  double sup_norm() const;

private:
  std::size_t tri(int i, int j) const {
    if (i > j) std::swap(i, j);
    // row-major upper triangle
    return static_cast<std::size_t>(i) * (2 * n_ - i - 1) / 2 + j;
  }
  int n_ = 0;
  std::vector<double> data_;
};

// Third-rank Christoffel values Gamma^k_{ij}, symmetric in (i, j).
class Christoffel {
public:
  Christoffel() = default;
  explicit Christoffel(int n) : n_(n), layers_(n, SymMatrix(n)) {}

  int dim() const noexcept { return n_; }
  double& operator()(int k, int i, int j) { return layers_[k](i, j); }
  double operator()(int k, int i, int j) const { return layers_[k](i, j); }

private:
  int n_ = 0;
  std::vector<SymMatrix> layers_;
};

class ConformalMetric {
public:
  // u is the conformal exponent over `domain.dimension` coordinates.
  // Ricci and scalar-curvature trees are built and compiled up front;
  // the Bianchi covector (third derivatives of u) is built on first use.
  ConformalMetric(Expr u, Domain domain);

  int dim() const noexcept { return domain_.dimension; }
  const Domain& domain() const noexcept { return domain_; }
  const Expr& exponent() const noexcept { return u_; }

  // Symbolic pieces; all exact trees in the expression grammar.
  const Expr& exponent_derivative(int i) const { return du_[i]; }
  Expr christoffel_expr(int k, int i, int j) const;
  const Expr& ricci_expr(int i, int j) const;
  const Expr& scalar_expr() const { return scalar_; }
  Expr volume_factor_expr() const;  // e^{n u}, the Riemannian volume density

  // Covariant operators applied to a scalar field phi (an Expr over the
  // same coordinates), as symbolic trees.
  Expr hessian_expr(const Expr& phi, int i, int j) const;
  Expr laplacian_expr(const Expr& phi) const;
  Expr gradient_norm_sq_expr(const Expr& phi) const;
  Expr gradient_pairing_expr(const Expr& phi, const Expr& psi) const;

  // Point evaluators.
  double exponent_at(std::span<const double> p) const;
  double conformal_factor(std::span<const double> p) const;  // e^{2u}
  Christoffel christoffel(std::span<const double> p) const;
  SymMatrix ricci(std::span<const double> p) const;
  double scalar_curvature(std::span<const double> p) const;
  SymMatrix hessian(const Expr& phi, std::span<const double> p) const;
  double laplacian(const Expr& phi, std::span<const double> p) const;
  double gradient_norm_sq(const Expr& phi, std::span<const double> p) const;
  double gradient_pairing(const Expr& phi, const Expr& psi,
                          std::span<const double> p) const;

  // Components of div(Ric) - dS/2; identically zero for smooth metrics,
  // so the evaluated values measure pipeline (not truncation) error.
  std::vector<double> bianchi_residual(std::span<const double> p) const;

  // Geodesic right-hand side: acc^k = -Gamma^k_ij v^i v^j, fast path used
  // by the integrator. scratch is reused across calls.
  void geodesic_acceleration(std::span<const double> x, std::span<const double> v,
                             std::span<double> acc, std::vector<double>& scratch) const;

private:
  Expr u_;
  Domain domain_;
  std::vector<Expr> du_;
  std::vector<Expr> ricci_exprs_;  // upper triangle, row-major
  Expr scalar_;
  std::vector<CompiledExpr> du_compiled_;
  CompiledExpr u_compiled_;
  std::vector<CompiledExpr> ricci_compiled_;
  CompiledExpr scalar_compiled_;

  struct BianchiCache;
  std::shared_ptr<BianchiCache> bianchi_;  // lazily filled, guarded by once_flag

  std::size_t tri(int i, int j) const {
    if (i > j) std::swap(i, j);
    return static_cast<std::size_t>(i) * (2 * dim() - i - 1) / 2 + j;
  }
};

}  // namespace warpsol
