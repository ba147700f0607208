// Microbenchmarks for the hot paths: transforms, the mollifier, drift
// assembly, one IMEX step, and path generation. Grid sizes are powers of two;
// the 2-d case uses the same total point budget as the largest 1-d case.

#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "spde/coefficients.hpp"
#include "spde/noise.hpp"
#include "spde/semigroup.hpp"
#include "spde/solver.hpp"
#include "spde/torus.hpp"

namespace {

using namespace spde;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

ScalarField wave(const TorusGrid& g) {
  ScalarField f = ScalarField::zeros(g);
  const double h = g.h();
  for (std::size_t p = 0; p < f.values.size(); ++p) {
    const double x = h * static_cast<double>(p % static_cast<std::size_t>(g.n));
    f.values[p] = std::sin(kTwoPi * x) + 0.25 * std::cos(3.0 * kTwoPi * x);
  }
  return f;
}

void BM_forward_transform(benchmark::State& state) {
  const TorusGrid g = TorusGrid::make(1, static_cast<int>(state.range(0)));
  const ScalarField f = wave(g);
  for (auto _ : state) benchmark::DoNotOptimize(forward_transform(f));
}
BENCHMARK(BM_forward_transform)->Arg(64)->Arg(256)->Arg(1024);

void BM_transform_round_trip(benchmark::State& state) {
  const TorusGrid g = TorusGrid::make(1, static_cast<int>(state.range(0)));
  const ScalarField f = wave(g);
  for (auto _ : state) benchmark::DoNotOptimize(inverse_transform(forward_transform(f)));
}
BENCHMARK(BM_transform_round_trip)->Arg(64)->Arg(256)->Arg(1024);

void BM_semigroup_apply(benchmark::State& state) {
  const TorusGrid g = TorusGrid::make(1, static_cast<int>(state.range(0)));
  const HeatSemigroup P(g, 0.01);
  const ScalarField f = wave(g);
  for (auto _ : state) benchmark::DoNotOptimize(P.apply(f));
}
BENCHMARK(BM_semigroup_apply)->Arg(64)->Arg(256)->Arg(1024);

void BM_apply_drift(benchmark::State& state) {
  const TorusGrid g = TorusGrid::make(1, static_cast<int>(state.range(0)));
  const CoefficientSet c = builtin_coefficients("trig");
  const HeatSemigroup P(g, 0.01);
  const ScalarField u = wave(g);
  for (auto _ : state) benchmark::DoNotOptimize(apply_drift(c, P, u));
}
BENCHMARK(BM_apply_drift)->Arg(64)->Arg(256)->Arg(1024);

void BM_imex_step(benchmark::State& state) {
  const TorusGrid g = TorusGrid::make(1, static_cast<int>(state.range(0)));
  const CoefficientSet c = builtin_coefficients("trig");
  SolverConfig cfg;
  cfg.grid = g;
  cfg.eps = 0.01;
  cfg.dt = 1e-5;
  cfg.T = 1e-4;
  cfg.K = 32;
  const HeatSemigroup P(g, cfg.eps);
  const NoisePath path = generate_path(1, cfg.K, cfg.dt, cfg.steps());
  const ScalarField u = wave(g);
  for (auto _ : state) benchmark::DoNotOptimize(step(c, P, u, path, 0, cfg));
}
BENCHMARK(BM_imex_step)->Arg(64)->Arg(256)->Arg(1024);

void BM_imex_step_2d(benchmark::State& state) {
  const TorusGrid g = TorusGrid::make(2, 32);
  const CoefficientSet c = builtin_coefficients("trig", {}, 2);
  SolverConfig cfg;
  cfg.grid = g;
  cfg.eps = 0.01;
  cfg.dt = 1e-5;
  cfg.T = 1e-4;
  cfg.K = 16;
  const HeatSemigroup P(g, cfg.eps);
  const NoisePath path = generate_path(1, cfg.K, cfg.dt, cfg.steps());
  const ScalarField u = wave(g);
  for (auto _ : state) benchmark::DoNotOptimize(step(c, P, u, path, 0, cfg));
}
BENCHMARK(BM_imex_step_2d);

void BM_generate_path(benchmark::State& state) {
  const int steps = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(generate_path(1, 32, 1e-4, steps));
}
BENCHMARK(BM_generate_path)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
