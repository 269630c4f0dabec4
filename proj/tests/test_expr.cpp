#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include "generators.hpp"
#include "warpsol/expr.hpp"
#include "warpsol/sampling.hpp"

using namespace warpsol;
using testing::random_expr;
using testing::random_point;

TEST_CASE("parser reports byte offsets") {
  auto offset_of = [](const char* text, int dim) -> std::size_t {
    try {
      parse_expr(text, dim);
    } catch (const ParseError& e) {
      return e.offset();
    }
    return static_cast<std::size_t>(-1);
  };
  CHECK(offset_of("1 + * 2", 2) == 4);
  CHECK(offset_of("x3 + 1", 2) == 0);        // variable index out of range
  CHECK(offset_of("foo(1)", 2) == 0);        // unknown function
  CHECK(offset_of("1 + bar", 2) == 4);       // identifier with no call
  CHECK(offset_of("(x1 + 2", 2) == 7);       // missing ')'
  CHECK(offset_of("x1 + ", 2) == 5);         // dangling operator
  CHECK(offset_of("cosh(x1", 2) == 7);
}

TEST_CASE("parser accepts the documented grammar") {
  const Expr e = parse_expr("-x1^2 + 2*coth(x2) - log(1.5 + x1*x1)/(3 - x2)", 2);
  const std::vector<double> p{0.5, 0.25};
  const double expected = -0.25 + 2.0 / std::tanh(0.25) -
                          std::log(1.75) / 2.75;
  CHECK(evaluate(e, p) == doctest::Approx(expected).epsilon(1e-14));

  // ^ binds tighter than unary minus and is right-associative
  CHECK(evaluate(parse_expr("-2^2", 1), std::vector<double>{0.0}) == -4.0);
  CHECK(evaluate(parse_expr("2^3^2", 1), std::vector<double>{0.0}) == 512.0);
}

TEST_CASE("symbolic derivative matches finite differences on 1000 random pairs") {
  const int dim = 3;
  const Domain box(dim, {-1, -1, -1}, {1, 1, 1}, 0.1);
  Rng rng(20240817);
  int tested = 0;
  double worst = 0.0;
  while (tested < 1000) {
    const Expr e = random_expr(rng, dim, 4);
    const std::vector<double> p = random_point(rng, dim);
    double value;
    try {
      value = evaluate(e, p);
    } catch (const DomainError&) {
      continue;
    }
    if (!std::isfinite(value) || std::abs(value) > 1e4) continue;

    bool usable = true;
    for (int axis = 0; axis < dim && usable; ++axis) {
      const Expr de = differentiate(e, axis);
      double sym;
      try {
        sym = evaluate(de, p);
      } catch (const DomainError&) {
        usable = false;
        break;
      }
      if (!std::isfinite(sym) || std::abs(sym) > 1e6) {
        usable = false;
        break;
      }
      const double fd = finite_difference(e, box, p, axis, 1);
      const double rel = std::abs(fd - sym) / std::max(1.0, std::abs(sym));
      worst = std::max(worst, rel);
      CHECK(rel <= 1e-6);
    }
    if (usable) ++tested;
  }
  MESSAGE("worst relative FD deviation: ", worst);
}

TEST_CASE("mixed partial derivatives commute") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Expr e = random_expr(rng, 2, 4);
    const Expr dxy = differentiate(differentiate(e, 0), 1);
    const Expr dyx = differentiate(differentiate(e, 1), 0);
    for (int k = 0; k < 5; ++k) {
      const std::vector<double> p = random_point(rng, 2);
      double a, b;
      try {
        a = evaluate(dxy, p);
        b = evaluate(dyx, p);
      } catch (const DomainError&) {
        continue;
      }
      const double rel = std::abs(a - b) / std::max(1.0, std::abs(a));
      CHECK(rel <= 1e-12);
    }
  }
}

TEST_CASE("print then parse is the identity on values") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const Expr e = random_expr(rng, 2, 4);
    const std::string s = to_string(e);
    const Expr back = parse_expr(s, 2);
    for (int k = 0; k < 5; ++k) {
      const std::vector<double> p = random_point(rng, 2);
      double a, b;
      try {
        a = evaluate(e, p);
        b = evaluate(back, p);
      } catch (const DomainError&) {
        continue;
      }
      CHECK(a == b);  // the printer emits shortest round-trip constants
    }
  }
}

TEST_CASE("compiled tape agrees with the tree evaluator") {
  Rng rng(314);
  for (int trial = 0; trial < 100; ++trial) {
    const Expr e = random_expr(rng, 3, 5);
    const CompiledExpr c = compile(e);
    REQUIRE(c.valid());
    for (int k = 0; k < 10; ++k) {
      const std::vector<double> p = random_point(rng, 3);
      double tree, tape;
      try {
        tree = evaluate(e, p);
        tape = c(p);
      } catch (const DomainError&) {
        continue;
      }
      CHECK(tape == doctest::Approx(tree).epsilon(1e-15));
    }
  }
}

TEST_CASE("evaluation is thread safe") {
  const Expr e = parse_expr("exp(tanh(x1)*2) + cosh(x2)/(2 + x1*x1) - coth(3 + x2*x2)", 2);
  const CompiledExpr c = compile(e);

  Rng rng(42);
  std::vector<std::vector<double>> pts;
  std::vector<double> expected;
  for (int i = 0; i < 2000; ++i) {
    pts.push_back(random_point(rng, 2));
    expected.push_back(c(pts.back()));
  }

  std::atomic<int> mismatches{0};
  std::vector<std::thread> workers;
  for (int w = 0; w < 8; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (c(pts[i]) != expected[i]) ++mismatches;
        if (evaluate(e, pts[i]) != evaluate(e, pts[i])) ++mismatches;
      }
    });
  }
  for (auto& t : workers) t.join();
  CHECK(mismatches.load() == 0);
}

TEST_CASE("domain inset separates contains from inner_contains") {
  const Domain d(2, {0.0, -1.0}, {4.0, 1.0}, 0.5);
  CHECK(d.contains(std::vector<double>{0.1, 0.0}));
  CHECK_FALSE(d.inner_contains(std::vector<double>{0.1, 0.0}));
  CHECK(d.inner_contains(std::vector<double>{2.0, 0.0}));
  CHECK_FALSE(d.contains(std::vector<double>{4.5, 0.0}));
}
