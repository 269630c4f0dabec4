#include "warpsol/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <unordered_map>
#include <unordered_set>

namespace warpsol {

namespace {

constexpr double kDivisorFloor = 1e-300;

Expr make(NodeKind kind, double value, int index, Expr a, Expr b) {
  auto node = std::make_shared<ExprNode>();
  node->kind = kind;
  node->value = value;
  node->index = index;
  node->a = std::move(a);
  node->b = std::move(b);
  return Expr(std::move(node));
}

bool const_value(const Expr& e, double& out) {
  if (e.valid() && e.node().kind == NodeKind::Constant) {
    out = e.node().value;
    return true;
  }
  return false;
}

double apply_unary(NodeKind kind, double x) {
  switch (kind) {
    case NodeKind::Neg:
      return -x;
    case NodeKind::Exp:
      return std::exp(x);
    case NodeKind::Log:
      if (x <= 0.0) throw DomainError("log of nonpositive value");
      return std::log(x);
    case NodeKind::Sinh:
      return std::sinh(x);
    case NodeKind::Cosh:
      return std::cosh(x);
    case NodeKind::Tanh:
      return std::tanh(x);
    case NodeKind::Coth: {
      // 1/tanh stays finite for |x| up to DBL_MAX; only the origin is singular.
      const double t = std::tanh(x);
      if (std::abs(t) < kDivisorFloor) throw DomainError("coth at zero");
      return 1.0 / t;
    }
    case NodeKind::Sqrt:
      if (x < 0.0) throw DomainError("sqrt of negative value");
      return std::sqrt(x);
    default:
      throw std::logic_error("apply_unary: not a unary kind");
  }
}

double apply_pow(double base, double exponent) {
  if (base < 0.0 && exponent != std::nearbyint(exponent))
    throw DomainError("negative base with non-integer exponent");
  if (base == 0.0 && exponent < 0.0) throw DomainError("zero base with negative exponent");
  return std::pow(base, exponent);
}

Expr make_unary(NodeKind kind, Expr x) {
  double c;
  if (const_value(x, c)) {
    try {
      const double v = apply_unary(kind, c);
      if (std::isfinite(v)) return constant(v);
    } catch (const DomainError&) {
      // keep the node; the violation surfaces at evaluation time
    }
  }
  return make(kind, 0.0, -1, std::move(x), Expr());
}

}  // namespace

Expr constant(double v) { return make(NodeKind::Constant, v, -1, Expr(), Expr()); }

Expr variable(int axis) {
  if (axis < 0) throw std::invalid_argument("variable axis must be nonnegative");
  return make(NodeKind::Variable, 0.0, axis, Expr(), Expr());
}

Expr operator-(Expr x) { return make_unary(NodeKind::Neg, std::move(x)); }
Expr exp(Expr x) { return make_unary(NodeKind::Exp, std::move(x)); }
Expr log(Expr x) { return make_unary(NodeKind::Log, std::move(x)); }
Expr sinh(Expr x) { return make_unary(NodeKind::Sinh, std::move(x)); }
Expr cosh(Expr x) { return make_unary(NodeKind::Cosh, std::move(x)); }
Expr tanh(Expr x) { return make_unary(NodeKind::Tanh, std::move(x)); }
Expr coth(Expr x) { return make_unary(NodeKind::Coth, std::move(x)); }
Expr sqrt(Expr x) { return make_unary(NodeKind::Sqrt, std::move(x)); }

Expr operator+(Expr lhs, Expr rhs) {
  double a, b;
  const bool ca = const_value(lhs, a), cb = const_value(rhs, b);
  if (ca && cb) return constant(a + b);
  if (ca && a == 0.0) return rhs;
  if (cb && b == 0.0) return lhs;
  return make(NodeKind::Add, 0.0, -1, std::move(lhs), std::move(rhs));
}

Expr operator-(Expr lhs, Expr rhs) {
  double a, b;
  const bool ca = const_value(lhs, a), cb = const_value(rhs, b);
  if (ca && cb) return constant(a - b);
  if (cb && b == 0.0) return lhs;
  if (ca && a == 0.0) return -std::move(rhs);
  return make(NodeKind::Sub, 0.0, -1, std::move(lhs), std::move(rhs));
}

Expr operator*(Expr lhs, Expr rhs) {
  double a, b;
  const bool ca = const_value(lhs, a), cb = const_value(rhs, b);
  if (ca && cb) return constant(a * b);
  if (ca && a == 0.0) return constant(0.0);
  if (cb && b == 0.0) return constant(0.0);
  if (ca && a == 1.0) return rhs;
  if (cb && b == 1.0) return lhs;
  return make(NodeKind::Mul, 0.0, -1, std::move(lhs), std::move(rhs));
}

Expr operator/(Expr lhs, Expr rhs) {
  double a, b;
  const bool ca = const_value(lhs, a), cb = const_value(rhs, b);
  if (ca && cb && std::abs(b) >= kDivisorFloor) return constant(a / b);
  if (cb && b == 1.0) return lhs;
  return make(NodeKind::Div, 0.0, -1, std::move(lhs), std::move(rhs));
}

Expr pow(Expr base, double exponent) {
  if (!std::isfinite(exponent)) throw std::invalid_argument("pow exponent must be finite");
  if (exponent == 0.0) return constant(1.0);
  if (exponent == 1.0) return base;
  double c;
  if (const_value(base, c)) {
    try {
      const double v = apply_pow(c, exponent);
      if (std::isfinite(v)) return constant(v);
    } catch (const DomainError&) {
    }
  }
  return make(NodeKind::Pow, exponent, -1, std::move(base), Expr());
}

bool is_constant(const Expr& e) { return e.valid() && e.node().kind == NodeKind::Constant; }

bool contains_variable(const Expr& e) {
  if (!e.valid()) return false;
  const ExprNode& n = e.node();
  if (n.kind == NodeKind::Variable) return true;
  return contains_variable(n.a) || contains_variable(n.b);
}

bool structurally_equal(const Expr& lhs, const Expr& rhs) {
  if (lhs.raw() == rhs.raw()) return true;
  if (!lhs.valid() || !rhs.valid()) return false;
  const ExprNode& a = lhs.node();
  const ExprNode& b = rhs.node();
  if (a.kind != b.kind || a.value != b.value || a.index != b.index) return false;
  return structurally_equal(a.a, b.a) && structurally_equal(a.b, b.b);
}

namespace {
void count_nodes(const Expr& e, std::unordered_set<const ExprNode*>& seen) {
  if (!e.valid() || !seen.insert(e.raw()).second) return;
  count_nodes(e.node().a, seen);
  count_nodes(e.node().b, seen);
}
}  // namespace

std::size_t node_count(const Expr& e) {
  std::unordered_set<const ExprNode*> seen;
  count_nodes(e, seen);
  return seen.size();
}

double evaluate(const Expr& e, std::span<const double> point) {
  if (!e.valid()) throw std::invalid_argument("evaluate: empty expression");
  const ExprNode& n = e.node();
  double result;
  switch (n.kind) {
    case NodeKind::Constant:
      result = n.value;
      break;
    case NodeKind::Variable:
      if (n.index >= static_cast<int>(point.size()))
        throw std::invalid_argument("evaluate: point has too few coordinates");
      result = point[n.index];
      break;
    case NodeKind::Add:
      result = evaluate(n.a, point) + evaluate(n.b, point);
      break;
    case NodeKind::Sub:
      result = evaluate(n.a, point) - evaluate(n.b, point);
      break;
    case NodeKind::Mul:
      result = evaluate(n.a, point) * evaluate(n.b, point);
      break;
    case NodeKind::Div: {
      const double num = evaluate(n.a, point);
      const double den = evaluate(n.b, point);
      if (std::abs(den) < kDivisorFloor) throw DomainError("division by near-zero value");
      result = num / den;
      break;
    }
    case NodeKind::Pow:
      result = apply_pow(evaluate(n.a, point), n.value);
      break;
    default:
      result = apply_unary(n.kind, evaluate(n.a, point));
      break;
  }
  if (!std::isfinite(result)) throw DomainError("non-finite value in evaluation");
  return result;
}

Expr differentiate(const Expr& e, int axis) {
  if (!e.valid()) throw std::invalid_argument("differentiate: empty expression");
  if (axis < 0) throw std::invalid_argument("differentiate: negative axis");
  const ExprNode& n = e.node();
  switch (n.kind) {
    case NodeKind::Constant:
      return constant(0.0);
    case NodeKind::Variable:
      return constant(n.index == axis ? 1.0 : 0.0);
    case NodeKind::Neg:
      return -differentiate(n.a, axis);
    case NodeKind::Exp:
      return exp(n.a) * differentiate(n.a, axis);
    case NodeKind::Log:
      return differentiate(n.a, axis) / n.a;
    case NodeKind::Sinh:
      return cosh(n.a) * differentiate(n.a, axis);
    case NodeKind::Cosh:
      return sinh(n.a) * differentiate(n.a, axis);
    case NodeKind::Tanh:
      return pow(cosh(n.a), -2.0) * differentiate(n.a, axis);
    case NodeKind::Coth:
      return -pow(sinh(n.a), -2.0) * differentiate(n.a, axis);
    case NodeKind::Sqrt:
      return differentiate(n.a, axis) / (constant(2.0) * sqrt(n.a));
    case NodeKind::Add:
      return differentiate(n.a, axis) + differentiate(n.b, axis);
    case NodeKind::Sub:
      return differentiate(n.a, axis) - differentiate(n.b, axis);
    case NodeKind::Mul:
      return differentiate(n.a, axis) * n.b + n.a * differentiate(n.b, axis);
    case NodeKind::Div:
      return (differentiate(n.a, axis) * n.b - n.a * differentiate(n.b, axis)) /
             (n.b * n.b);
    case NodeKind::Pow:
      return constant(n.value) * pow(n.a, n.value - 1.0) * differentiate(n.a, axis);
  }
  throw std::logic_error("differentiate: unhandled node kind");
}

// ---------------------------------------------------------------------------
// printing

namespace {

int precedence(NodeKind k) {
  switch (k) {
    case NodeKind::Add:
    case NodeKind::Sub:
      return 1;
    case NodeKind::Mul:
    case NodeKind::Div:
      return 2;
    case NodeKind::Neg:
      return 3;
    case NodeKind::Pow:
      return 4;
    default:
      return 5;
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

const char* function_name(NodeKind k) {
  switch (k) {
    case NodeKind::Exp:
      return "exp";
    case NodeKind::Log:
      return "log";
    case NodeKind::Sinh:
      return "sinh";
    case NodeKind::Cosh:
      return "cosh";
    case NodeKind::Tanh:
      return "tanh";
    case NodeKind::Coth:
      return "coth";
    case NodeKind::Sqrt:
      return "sqrt";
    default:
      return nullptr;
  }
}

void print_node(const Expr& e, std::string& out);

void print_child(const Expr& child, int parent_prec, bool needs_parens_on_tie,
                 std::string& out) {
  const int child_prec = precedence(child.node().kind);
  const bool parens =
      child_prec < parent_prec || (child_prec == parent_prec && needs_parens_on_tie);
  if (parens) out += '(';
  print_node(child, out);
  if (parens) out += ')';
}

void print_node(const Expr& e, std::string& out) {
  const ExprNode& n = e.node();
  switch (n.kind) {
    case NodeKind::Constant:
      out += format_double(n.value);
      return;
    case NodeKind::Variable:
      out += 'x';
      out += std::to_string(n.index + 1);
      return;
    case NodeKind::Neg:
      out += '-';
      print_child(n.a, precedence(NodeKind::Neg), false, out);
      return;
    case NodeKind::Add:
      print_child(n.a, 1, false, out);
      out += " + ";
      // Parenthesize ties so the reparsed tree reassociates exactly as
      // printed; float addition is not associative.
      print_child(n.b, 1, true, out);
      return;
    case NodeKind::Sub:
      print_child(n.a, 1, false, out);
      out += " - ";
      print_child(n.b, 1, true, out);
      return;
    case NodeKind::Mul:
      print_child(n.a, 2, false, out);
      out += "*";
      print_child(n.b, 2, true, out);
      return;
    case NodeKind::Div:
      print_child(n.a, 2, false, out);
      out += "/";
      print_child(n.b, 2, true, out);
      return;
    case NodeKind::Pow:
      print_child(n.a, 4, true, out);
      out += '^';
      if (n.value < 0.0) {
        out += '(';
        out += format_double(n.value);
        out += ')';
      } else {
        out += format_double(n.value);
      }
      return;
    default: {
      out += function_name(n.kind);
      out += '(';
      print_node(n.a, out);
      out += ')';
      return;
    }
  }
}

}  // namespace

std::string to_string(const Expr& e) {
  if (!e.valid()) return "<empty>";
  std::string out;
  print_node(e, out);
  return out;
}

// ---------------------------------------------------------------------------
// parsing

namespace {

struct Parser {
  std::string_view text;
  std::size_t pos = 0;
  int dimension;

  explicit Parser(std::string_view t, int dim) : text(t), dimension(dim) {}

  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    throw ParseError(msg, at);
  }

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  bool peek(char c) {
    skip_ws();
    return pos < text.size() && text[pos] == c;
  }

  bool consume(char c) {
    if (peek(c)) {
      ++pos;
      return true;
    }
    return false;
  }

  Expr parse() {
    Expr e = parse_sum();
    skip_ws();
    if (pos != text.size()) fail("unexpected trailing input", pos);
    return e;
  }

  Expr parse_sum() {
    Expr lhs = parse_product();
    for (;;) {
      if (consume('+')) {
        lhs = std::move(lhs) + parse_product();
      } else if (consume('-')) {
        lhs = std::move(lhs) - parse_product();
      } else {
        return lhs;
      }
    }
  }

  Expr parse_product() {
    Expr lhs = parse_unary();
    for (;;) {
      if (consume('*')) {
        lhs = std::move(lhs) * parse_unary();
      } else if (consume('/')) {
        lhs = std::move(lhs) / parse_unary();
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    if (consume('-')) return -parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    skip_ws();
    if (!consume('^')) return base;
    const std::size_t caret = pos - 1;
    Expr exponent = parse_unary();  // right-associative, may itself be a power
    if (contains_variable(exponent))
      fail("exponent must be a constant expression", caret);
    double value;
    try {
      value = evaluate(exponent, {});
    } catch (const DomainError&) {
      fail("exponent does not evaluate to a finite constant", caret);
    }
    return pow(std::move(base), value);
  }

  Expr parse_primary() {
    skip_ws();
    if (pos >= text.size()) fail("unexpected end of input", pos);
    const char c = text[pos];
    if (c == '(') {
      ++pos;
      Expr inner = parse_sum();
      if (!consume(')')) fail("expected ')'", pos);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail(std::string("unexpected character '") + c + "'", pos);
  }

  Expr parse_number() {
    const std::size_t start = pos;
    double value;
    auto [ptr, ec] =
        std::from_chars(text.data() + pos, text.data() + text.size(), value);
    if (ec != std::errc()) fail("malformed number", start);
    pos = static_cast<std::size_t>(ptr - text.data());
    return constant(value);
  }

  Expr parse_identifier() {
    const std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
      ++pos;
    const std::string_view name = text.substr(start, pos - start);

    if (name.size() >= 2 && name[0] == 'x' &&
        std::isdigit(static_cast<unsigned char>(name[1]))) {
      int index = 0;
      auto [ptr, ec] =
          std::from_chars(name.data() + 1, name.data() + name.size(), index);
      if (ec == std::errc() && ptr == name.data() + name.size()) {
        if (index < 1 || index > dimension)
          fail("variable index out of range for dimension " + std::to_string(dimension),
               start);
        return variable(index - 1);
      }
    }

    skip_ws();
    if (pos >= text.size() || text[pos] != '(')
      fail("unknown identifier '" + std::string(name) + "'", start);
    ++pos;
    Expr arg = parse_sum();
    if (!consume(')')) fail("expected ')'", pos);

    if (name == "exp") return exp(std::move(arg));
    if (name == "log") return log(std::move(arg));
    if (name == "sinh") return sinh(std::move(arg));
    if (name == "cosh") return cosh(std::move(arg));
    if (name == "tanh") return tanh(std::move(arg));
    if (name == "coth") return coth(std::move(arg));
    if (name == "sqrt") return sqrt(std::move(arg));
    fail("unknown function '" + std::string(name) + "'", start);
  }
};

}  // namespace

Expr parse_expr(std::string_view text, int dimension) {
  if (dimension < 1) throw std::invalid_argument("parse_expr: dimension must be >= 1");
  Parser p(text, dimension);
  return p.parse();
}

// ---------------------------------------------------------------------------
// domain

Domain::Domain(int n, std::vector<double> lo, std::vector<double> hi, double inset_margin)
    : dimension(n), lower(std::move(lo)), upper(std::move(hi)), inset(inset_margin) {
  if (n < 1) throw std::invalid_argument("Domain: dimension must be >= 1");
  if (static_cast<int>(lower.size()) != n || static_cast<int>(upper.size()) != n)
    throw std::invalid_argument("Domain: bounds must have one entry per axis");
  if (!(inset > 0.0)) throw std::invalid_argument("Domain: inset must be positive");
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]))
      throw std::invalid_argument("Domain: bounds must be finite");
    if (!(lower[i] + inset < upper[i] - inset))
      throw std::invalid_argument("Domain: inset leaves no room on axis " +
                                  std::to_string(i + 1));
  }
}

bool Domain::contains(std::span<const double> p) const {
  if (static_cast<int>(p.size()) != dimension) return false;
  for (int i = 0; i < dimension; ++i)
    if (!(p[i] >= lower[i] && p[i] <= upper[i])) return false;
  return true;
}

bool Domain::inner_contains(std::span<const double> p) const {
  if (static_cast<int>(p.size()) != dimension) return false;
  for (int i = 0; i < dimension; ++i)
    if (!(p[i] >= lower[i] + inset && p[i] <= upper[i] - inset)) return false;
  return true;
}

double finite_difference(const Expr& e, const Domain& domain, std::span<const double> p,
                         int axis, int order) {
  if (axis < 0 || axis >= domain.dimension)
    throw std::invalid_argument("finite_difference: axis out of range");
  if (order != 1 && order != 2)
    throw std::invalid_argument("finite_difference: order must be 1 or 2");
  if (!domain.contains(p)) throw DomainError("finite_difference: point outside domain");

  const double eps = std::numeric_limits<double>::epsilon();
  const double scale = std::abs(p[axis]) + 1.0;
  const double h = (order == 1 ? std::cbrt(eps) : std::pow(eps, 0.25)) * scale;

  std::vector<double> q(p.begin(), p.end());
  q[axis] = p[axis] + h;
  if (!domain.contains(q)) throw DomainError("finite_difference: stencil leaves domain");
  const double fp = evaluate(e, q);
  q[axis] = p[axis] - h;
  if (!domain.contains(q)) throw DomainError("finite_difference: stencil leaves domain");
  const double fm = evaluate(e, q);

  if (order == 1) return (fp - fm) / (2.0 * h);
  const double f0 = evaluate(e, p);
  return (fp - 2.0 * f0 + fm) / (h * h);
}

// ---------------------------------------------------------------------------
// compiled tape

CompiledExpr compile(const Expr& e) {
  if (!e.valid()) throw std::invalid_argument("compile: empty expression");
  CompiledExpr out;
  std::unordered_map<const ExprNode*, int> slot;
  // iterative postorder so deep derivative trees cannot overflow the stack
  struct Frame {
    const ExprNode* node;
    bool expanded;
  };
  std::vector<Frame> stack{{e.raw(), false}};
  while (!stack.empty()) {
    auto [node, expanded] = stack.back();
    stack.pop_back();
    if (slot.count(node)) continue;
    if (!expanded) {
      stack.push_back({node, true});
      if (node->b.valid() && !slot.count(node->b.raw()))
        stack.push_back({node->b.raw(), false});
      if (node->a.valid() && !slot.count(node->a.raw()))
        stack.push_back({node->a.raw(), false});
      continue;
    }
    CompiledExpr::Instr instr;
    instr.op = node->kind;
    switch (node->kind) {
      case NodeKind::Constant:
        instr.imm = node->value;
        break;
      case NodeKind::Variable:
        instr.a = node->index;
        break;
      case NodeKind::Pow:
        instr.a = slot.at(node->a.raw());
        instr.imm = node->value;
        break;
      case NodeKind::Add:
      case NodeKind::Sub:
      case NodeKind::Mul:
      case NodeKind::Div:
        instr.a = slot.at(node->a.raw());
        instr.b = slot.at(node->b.raw());
        break;
      default:
        instr.a = slot.at(node->a.raw());
        break;
    }
    slot[node] = static_cast<int>(out.code_.size());
    out.code_.push_back(instr);
  }
  return out;
}

double CompiledExpr::eval(std::span<const double> point,
                          std::vector<double>& scratch) const {
  if (code_.empty()) throw std::invalid_argument("CompiledExpr: not compiled");
  scratch.resize(code_.size());
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& in = code_[i];
    double v;
    switch (in.op) {
      case NodeKind::Constant:
        v = in.imm;
        break;
      case NodeKind::Variable:
        if (in.a >= static_cast<int>(point.size()))
          throw std::invalid_argument("CompiledExpr: point has too few coordinates");
        v = point[in.a];
        break;
      case NodeKind::Add:
        v = scratch[in.a] + scratch[in.b];
        break;
      case NodeKind::Sub:
        v = scratch[in.a] - scratch[in.b];
        break;
      case NodeKind::Mul:
        v = scratch[in.a] * scratch[in.b];
        break;
      case NodeKind::Div: {
        const double den = scratch[in.b];
        if (std::abs(den) < kDivisorFloor) throw DomainError("division by near-zero value");
        v = scratch[in.a] / den;
        break;
      }
      case NodeKind::Pow:
        v = apply_pow(scratch[in.a], in.imm);
        break;
      default:
        v = apply_unary(in.op, scratch[in.a]);
        break;
    }
    scratch[i] = v;
  }
  const double result = scratch.back();
  if (!std::isfinite(result)) throw DomainError("non-finite value in evaluation");
  return result;
}

double CompiledExpr::operator()(std::span<const double> point) const {
  std::vector<double> scratch;
  return eval(point, scratch);
}

}  // namespace warpsol
