#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Closed symbolic expression algebra over points of R^n.
//
// The node set is deliberately small and closed under differentiation:
// constants, coordinates x1..xn, unary {neg, exp, log, sinh, cosh, tanh,
// coth, sqrt}, binary {+, -, *, /} and pow with a constant real exponent.
// Trees are immutable and share subtrees; all mutating-looking operations
// return new trees. The only rewriting performed is constant folding and
// the x*0 / x*1 (and +0, ^0, ^1) eliminations that keep derivative trees
// from drowning in trivial factors.

namespace warpsol {

// Syntax error produced by parse_expr; offset is a byte offset into the input.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

// Evaluation left the domain of some node: log of a nonpositive value,
// coth at zero, division by magnitude < 1e-300, negative base under a
// fractional power, or a non-finite result.
class DomainError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class NodeKind {
  Constant,
  Variable,
  Neg,
  Exp,
  Log,
  Sinh,
  Cosh,
  Tanh,
  Coth,
  Sqrt,
  Add,
  Sub,
  Mul,
  Div,
  Pow,  // child ^ constant exponent
};

struct ExprNode;

// Value-semantic handle to an immutable expression tree.
class Expr {
public:
  Expr() = default;
  explicit Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}

  bool valid() const noexcept { return node_ != nullptr; }
  const ExprNode& node() const { return *node_; }
  const ExprNode* raw() const noexcept { return node_.get(); }

private:
  std::shared_ptr<const ExprNode> node_;
};

struct ExprNode {
  NodeKind kind;
  double value = 0.0;  // Constant payload, or Pow exponent
  int index = -1;      // Variable axis (0-based)
  Expr a;              // unary child / binary lhs
  Expr b;              // binary rhs
};

// Factories. Smart constructors fold constants and drop trivial factors.
Expr constant(double v);
Expr variable(int axis);
Expr operator-(Expr x);
Expr operator+(Expr lhs, Expr rhs);
Expr operator-(Expr lhs, Expr rhs);
Expr operator*(Expr lhs, Expr rhs);
Expr operator/(Expr lhs, Expr rhs);
Expr exp(Expr x);
Expr log(Expr x);
Expr sinh(Expr x);
Expr cosh(Expr x);
Expr tanh(Expr x);
Expr coth(Expr x);
Expr sqrt(Expr x);
Expr pow(Expr base, double exponent);

inline Expr operator+(Expr lhs, double rhs) { return std::move(lhs) + constant(rhs); }
inline Expr operator+(double lhs, Expr rhs) { return constant(lhs) + std::move(rhs); }
inline Expr operator-(Expr lhs, double rhs) { return std::move(lhs) - constant(rhs); }
inline Expr operator-(double lhs, Expr rhs) { return constant(lhs) - std::move(rhs); }
inline Expr operator*(Expr lhs, double rhs) { return std::move(lhs) * constant(rhs); }
inline Expr operator*(double lhs, Expr rhs) { return constant(lhs) * std::move(rhs); }
inline Expr operator/(Expr lhs, double rhs) { return std::move(lhs) / constant(rhs); }
inline Expr operator/(double lhs, Expr rhs) { return constant(lhs) / std::move(rhs); }

bool is_constant(const Expr& e);
bool contains_variable(const Expr& e);

// Structural comparison: same shape, same kinds, identical constants.
bool structurally_equal(const Expr& lhs, const Expr& rhs);

// Number of distinct DAG nodes (shared subtrees counted once).
std::size_t node_count(const Expr& e);

// Evaluate at a point; throws DomainError on any domain violation and
// std::invalid_argument if the point has fewer coordinates than some
// variable requires.
double evaluate(const Expr& e, std::span<const double> point);

// Exact partial derivative along `axis` (0-based), as a new tree in the
// same grammar; d/dx coth(u) is encoded as -sinh(u)^(-2) * u'.
Expr differentiate(const Expr& e, int axis);

// Grammar-conforming rendering; parse_expr(to_string(e), n) is
// structurally equal to e.
std::string to_string(const Expr& e);

// Parse the expression grammar (see README for the EBNF). Variables are
// x1..x<dimension>; unknown identifiers, out-of-range variable indices and
// non-constant exponents raise ParseError with a byte offset.
Expr parse_expr(std::string_view text, int dimension);

// Axis-aligned closed box with a strict sampling inset.
struct Domain {
  int dimension = 0;
  std::vector<double> lower;
  std::vector<double> upper;
  double inset = 0.0;

  Domain() = default;
  // Requires n >= 1, matching bounds, inset > 0 and
  // lower[i] + inset < upper[i] - inset on every axis.
  Domain(int n, std::vector<double> lo, std::vector<double> hi, double inset_margin);

  bool contains(std::span<const double> p) const;        // closed box
  bool inner_contains(std::span<const double> p) const;  // inset box
};

// Central finite differences used as the independent check against
// symbolic derivatives. order 1: step h = cbrt(eps)*(|p_axis|+1);
// order 2: h = eps^(1/4)*(|p_axis|+1). The stencil must stay inside the
// domain box.
double finite_difference(const Expr& e, const Domain& domain,
                         std::span<const double> p, int axis, int order);

// Expression flattened to a postorder tape over the node DAG. Shared
// subtrees are evaluated once; evaluation is allocation-free when the
// caller supplies scratch. Same error semantics as evaluate().
class CompiledExpr {
public:
  struct Instr {
    NodeKind op;
    int a = -1;
    int b = -1;
    double imm = 0.0;
  };

  CompiledExpr() = default;

  double operator()(std::span<const double> point) const;
  double eval(std::span<const double> point, std::vector<double>& scratch) const;

  std::size_t size() const noexcept { return code_.size(); }
  bool valid() const noexcept { return !code_.empty(); }

private:
  friend CompiledExpr compile(const Expr& e);
  std::vector<Instr> code_;
};

CompiledExpr compile(const Expr& e);

}  // namespace warpsol
