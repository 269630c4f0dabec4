// Hot-path microbenchmarks: expression evaluation (tree vs compiled tape),
// curvature point evaluation, geodesic stepping, and a full verification
// pass. Run with --benchmark_min_time=... for tighter numbers.

#include <benchmark/benchmark.h>

#include <vector>

#include "warpsol/expr.hpp"
#include "warpsol/gallery.hpp"
#include "warpsol/geodesic.hpp"
#include "warpsol/metric.hpp"
#include "warpsol/sampling.hpp"
#include "warpsol/soliton.hpp"

using namespace warpsol;

namespace {

Expr sample_tree() {
  return parse_expr(
      "exp(tanh(x1)*2) + cosh(x2)/(2 + x1*x1) - log(1.5 + x3*x3)*coth(3 + x2*x2)", 3);
}

void bm_tree_evaluate(benchmark::State& state) {
  const Expr e = sample_tree();
  const std::vector<double> p{0.3, -0.7, 0.9};
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(e, p));
}
BENCHMARK(bm_tree_evaluate);

void bm_compiled_evaluate(benchmark::State& state) {
  const CompiledExpr c = compile(sample_tree());
  const std::vector<double> p{0.3, -0.7, 0.9};
  std::vector<double> scratch;
  for (auto _ : state) benchmark::DoNotOptimize(c.eval(p, scratch));
}
BENCHMARK(bm_compiled_evaluate);

void bm_ricci_point(benchmark::State& state) {
  WarpedSolitonData data = build_example(default_spec(ExampleId::schouten_linear));
  const std::vector<double> p{0.3, -0.7, 0.9};
  for (auto _ : state) benchmark::DoNotOptimize(data.base().ricci(p));
}
BENCHMARK(bm_ricci_point);

void bm_geodesic_steps(benchmark::State& state) {
  ConformalMetric g(constant(0.0) - log(variable(1)),
                    Domain(2, {-1e6, 1e-4}, {1e6, 1e6}, 1e-5));
  const std::vector<double> p{0.0, 1.0};
  const std::vector<double> v{1.0, 0.0};
  for (auto _ : state) {
    const Trajectory tr = integrate_geodesic(g, p, v, 1.0, 1e-3);
    benchmark::DoNotOptimize(tr.positions.back());
  }
  state.SetItemsProcessed(state.iterations() * 1000);  // RK4 steps per pass
}
BENCHMARK(bm_geodesic_steps);

void bm_verify_pass(benchmark::State& state) {
  WarpedSolitonData data = build_example(default_spec(ExampleId::cosh_traceless));
  const auto pts = sample_points(data.domain(), 200, 2024, false);
  for (auto _ : state) {
    const ResidualReport rep = verify_soliton(data, pts, Tolerances{});
    benchmark::DoNotOptimize(rep.pass);
  }
  state.SetItemsProcessed(state.iterations() * 200);
}
BENCHMARK(bm_verify_pass);

}  // namespace

BENCHMARK_MAIN();
