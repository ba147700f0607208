#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "spde/coefficients.hpp"
#include "spde/diagnostics.hpp"
#include "spde/noise.hpp"
#include "spde/semigroup.hpp"
#include "spde/solver.hpp"
#include "spde/torus.hpp"

using namespace spde;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

ScalarField sine_field(const TorusGrid& g, int mode = 1, double amp = 1.0) {
  ScalarField u = ScalarField::zeros(g);
  for (int i = 0; i < g.n; ++i) u.at(i) = amp * std::sin(kTwoPi * mode * i * g.h());
  return u;
}

SolverConfig small_config(double eps = 0.0, int K = 4) {
  SolverConfig cfg;
  cfg.grid = TorusGrid::make(1, 32);
  cfg.eps = eps;
  cfg.dt = 2e-4;
  cfg.T = 4e-3;
  cfg.K = K;
  cfg.snapshot_stride = 1;
  return cfg;
}

}  // namespace

TEST_CASE("energy residual recombines to the solver's own log") {
  const CoefficientSet c = builtin_coefficients("trig");
  const SolverConfig cfg = small_config(0.01);
  const Trajectory traj = integrate(c, cfg, sine_field(cfg.grid), std::uint64_t{4});
  const std::vector<double> r = ito_energy_residual(traj, c);
  REQUIRE(r.size() == traj.energy.ito_residual.size());
  for (std::size_t m = 0; m < r.size(); ++m) CHECK(r[m] == traj.energy.ito_residual[m]);

  Trajectory truncated = traj;
  truncated.energy.drift_pairing.pop_back();
  CHECK_THROWS(ito_energy_residual(truncated, c));

  Trajectory empty = traj;
  empty.energy.h_norm_sq.clear();
  CHECK_THROWS(ito_energy_residual(empty, c));

  const CoefficientSet c2 = builtin_coefficients("trig", {}, 2);
  CHECK_THROWS(ito_energy_residual(traj, c2));
}

TEST_CASE("monotonicity probe finds an admissible pair without violations") {
  const TorusGrid g = TorusGrid::make(1, 32);
  const HeatSemigroup P(g, 0.01);
  for (const char* family : {"trig", "frozen"}) {
    const CoefficientSet c = builtin_coefficients(family);
    const MonotonicityReport rep = monotonicity_probe(c, P, 500, g);
    CHECK(rep.sampled_pairs == 500);
    CHECK(rep.violations == 0);
    CHECK(rep.fitted_delta3 > 0.0);
    CHECK(rep.fitted_delta3 <= c.delta * (1.0 + 1e-12));
    CHECK(rep.fitted_C >= 0.0);
    CHECK(std::isfinite(rep.fitted_C));
  }

  const CoefficientSet trig = builtin_coefficients("trig");
  const MonotonicityReport a = monotonicity_probe(trig, P, 500, g);
  const MonotonicityReport b = monotonicity_probe(trig, P, 500, g);
  CHECK(a.fitted_delta3 == b.fitted_delta3);
  CHECK(a.fitted_C == b.fitted_C);

  CHECK_THROWS(monotonicity_probe(trig, P, 499, g));
  const HeatSemigroup Q(TorusGrid::make(1, 64), 0.01);
  CHECK_THROWS(monotonicity_probe(trig, Q, 500, g));
  const CoefficientSet c2 = builtin_coefficients("trig", {}, 2);
  CHECK_THROWS(monotonicity_probe(c2, P, 500, g));
}

TEST_CASE("weak residual vanishes on a constant state") {
  const CoefficientSet c = builtin_coefficients("trig");
  SolverConfig cfg;
  cfg.grid = TorusGrid::make(1, 64);
  cfg.dt = 4e-5;
  cfg.T = 2e-3;
  cfg.snapshot_stride = 1;
  const ScalarField u0 = ScalarField::constant(cfg.grid, 0.7);
  const Trajectory traj = integrate(c, cfg, u0, std::uint64_t{0});
  const WeakResidualReport rep = weak_residual(traj, c, 8);
  CHECK(rep.test_functions == 8);
  CHECK(rep.residuals.size() == 8);
  CHECK(rep.max_residual <= 1e-12);
  CHECK(!rep.quadrature_degraded);
  CHECK(rep.dt == cfg.dt);
  CHECK(rep.h == cfg.grid.h());

  SolverConfig coarse = cfg;
  coarse.snapshot_stride = 5;
  const Trajectory strided = integrate(c, coarse, u0, std::uint64_t{0});
  CHECK(weak_residual(strided, c, 5).quadrature_degraded);

  CHECK_THROWS(weak_residual(traj, c, 4));
  CHECK_THROWS(weak_residual(Trajectory{}, c, 5));
}

TEST_CASE("weak residual needs the retained path when noise is on") {
  const CoefficientSet c = builtin_coefficients("trig");
  const SolverConfig cfg = small_config(0.0, 4);
  const Trajectory traj = integrate(c, cfg, sine_field(cfg.grid), std::uint64_t{2});
  CHECK_NOTHROW(weak_residual(traj, c, 5));
  Trajectory dropped = traj;
  dropped.path.reset();
  CHECK_THROWS(weak_residual(dropped, c, 5));
}

TEST_CASE("uniform monitor averages coupled groups and checks the family") {
  const CoefficientSet c = builtin_coefficients("trig");
  const ScalarField u0 = sine_field(TorusGrid::make(1, 32));

  std::vector<Trajectory> trajs;
  for (double eps : {0.01, 0.02}) {
    for (std::uint64_t seed : {1ull, 2ull}) {
      const SolverConfig cfg = small_config(eps);
      auto path = std::make_shared<const NoisePath>(
          generate_path(seed, cfg.K, cfg.dt, cfg.steps()));
      trajs.push_back(integrate(c, cfg, u0, path));
    }
  }

  const MonitorTable table = uniform_monitor(trajs, 1e6);
  REQUIRE(table.eps.size() == 2);
  CHECK(table.eps[0] == 0.01);
  CHECK(table.eps[1] == 0.02);
  CHECK(table.per_group == 2);
  CHECK(table.columns.size() == 2);
  CHECK(table.pass);
  for (double r : table.ratio) {
    CHECK(r >= 1.0);
    CHECK(std::isfinite(r));
  }
  for (const auto& col : table.columns)
    for (double v : col) CHECK(v >= 0.0);

  // Tight factor fails without throwing.
  CHECK(!uniform_monitor(trajs, 1.0 + 1e-15).pass);

  CHECK_THROWS(uniform_monitor(std::span<const Trajectory>{}));

  std::vector<Trajectory> other_u0 = trajs;
  other_u0[3] = integrate(c, small_config(0.02),
                          sine_field(TorusGrid::make(1, 32), 1, 2.0), std::uint64_t{2});
  CHECK_THROWS(uniform_monitor(other_u0));

  std::vector<Trajectory> uncoupled = trajs;
  uncoupled[3] = integrate(c, small_config(0.02), u0, std::uint64_t{3});
  CHECK_THROWS(uniform_monitor(uncoupled));

  std::vector<Trajectory> uneven(trajs.begin(), trajs.begin() + 3);
  CHECK_THROWS(uniform_monitor(uneven));

  SolverConfig other_dt = small_config(0.01);
  other_dt.dt = 1e-4;
  std::vector<Trajectory> mixed = trajs;
  mixed[0] = integrate(c, other_dt, u0, std::uint64_t{1});
  CHECK_THROWS(uniform_monitor(mixed));
}

TEST_CASE("monitor column names are stable") {
  const auto names = monitor_column_names();
  CHECK(std::strcmp(names[0], "sup_h_norm_sq") == 0);
  CHECK(std::strcmp(names[1], "h1_integral") == 0);
  CHECK(std::strcmp(names[2], "sup_l4_pow4") == 0);
  CHECK(std::strcmp(names[3], "sup_grad_linf_sq") == 0);
  CHECK(std::strcmp(names[4], "holder") == 0);
}

TEST_CASE("operator bound probe reports a finite dual norm constant") {
  const TorusGrid g = TorusGrid::make(1, 32);
  const HeatSemigroup P(g, 0.01);
  const CoefficientSet c = builtin_coefficients("trig");
  const OperatorBoundReport rep = operator_bound_probe(c, P, 10);
  CHECK(rep.samples == 10);
  CHECK(rep.C_fit > 0.0);
  CHECK(std::isfinite(rep.C_fit));
  CHECK(rep.truncation_gap >= 0.0);
  CHECK(rep.truncation_gap <= 1.0);

  const OperatorBoundReport again = operator_bound_probe(c, P, 10);
  CHECK(again.C_fit == rep.C_fit);

  CHECK_THROWS(operator_bound_probe(c, P, 0));
  const CoefficientSet c2 = builtin_coefficients("trig", {}, 2);
  CHECK_THROWS(operator_bound_probe(c2, P, 10));
}

TEST_CASE("tau scan hits the gradient trigger or reports the horizon") {
  const CoefficientSet c = builtin_coefficients("trig");
  const SolverConfig cfg = small_config(0.0, 0);
  const Trajectory traj = integrate(c, cfg, sine_field(cfg.grid), std::uint64_t{0});

  const TauReport far = tau_scan(traj, 1e9);
  CHECK(!far.hit);
  CHECK(far.tau_time == traj.times.back());
  CHECK(far.stop_snapshot == static_cast<int>(traj.times.size()) - 1);
  CHECK(far.trigger.empty());

  // The initial gradient sup is 2 pi, so any tiny threshold trips at t = 0.
  const TauReport near = tau_scan(traj, 1e-12);
  CHECK(near.hit);
  CHECK(near.trigger == "grad");
  CHECK(near.tau_time == 0.0);
  CHECK(near.stop_snapshot == 0);

  CHECK_THROWS(tau_scan(traj, 0.0));
  CHECK_THROWS(tau_scan(Trajectory{}, 1.0));
}

TEST_CASE("tau scan falls back to the Holder trigger") {
  const TorusGrid g = TorusGrid::make(1, 32);
  Trajectory traj;
  traj.config.grid = g;
  traj.config.dt = 0.1;
  traj.times = {0.0, 0.1, 0.2};
  traj.snapshots = {ScalarField::zeros(g), ScalarField::constant(g, 1.0),
                    ScalarField::constant(g, 1.0)};
  traj.final_state = traj.snapshots.back();
  traj.energy.grad_sup = {0.0, 0.0, 0.0};

  // Constants carry no gradient; the jump drives the parabolic quotient to
  // 1 / 0.1^0.5 which is above the threshold.
  const TauReport rep = tau_scan(traj, 1.0);
  CHECK(rep.hit);
  CHECK(rep.trigger == "holder");
  CHECK(rep.tau_time == 0.1);
  CHECK(rep.stop_snapshot == 1);
}
