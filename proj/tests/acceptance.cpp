// Acceptance gate: eleven numbered criteria, one PASS/FAIL line each, exit 0
// only when every line passes. Tolerances are pinned here, next to the checks.
//
// Heavy pieces (the eps sweep and the uniqueness study) run at desk scale:
// d = 1, n = 64, T <= 0.5, at most 64 Monte Carlo seeds.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "spde/coefficients.hpp"
#include "spde/diagnostics.hpp"
#include "spde/experiments.hpp"
#include "spde/noise.hpp"
#include "spde/rng.hpp"
#include "spde/semigroup.hpp"
#include "spde/solver.hpp"
#include "spde/torus.hpp"
#include "spde/uniqueness.hpp"

namespace {

using namespace spde;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

ScalarField sine_field(const TorusGrid& g) {
  ScalarField f = ScalarField::zeros(g);
  for (int i = 0; i < g.n; ++i) f.at(i) = std::sin(kTwoPi * i * g.h());
  return f;
}

// Reproducible band-limited field: Gaussian weights on the first K real
// Fourier modes, scaled by a per-trial amplitude.
ScalarField band_field(const TorusGrid& g, int K, std::uint64_t seed, int trial,
                       double amp) {
  const NoiseBasis& basis = NoiseBasis::shared(g, K);
  ScalarField f = ScalarField::zeros(g);
  for (int j = 0; j < K; ++j) {
    const double w = amp * rng::gaussian(seed, static_cast<std::uint64_t>(trial),
                                         static_cast<std::uint64_t>(j));
    const ScalarField& e = basis.fields[static_cast<std::size_t>(j)];
    for (std::size_t p = 0; p < f.values.size(); ++p) f.values[p] += w * e.values[p];
  }
  return f;
}

double grid_mean(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values) s += v;
  return s / static_cast<double>(f.values.size());
}

double linf_diff(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (std::size_t p = 0; p < a.values.size(); ++p)
    m = std::max(m, std::abs(a.values[p] - b.values[p]));
  return m;
}

const std::string* assertion_line(const RunResult& r, const std::string& name) {
  const std::string pass = "PASS " + name + " ";
  const std::string fail = "FAIL " + name + " ";
  for (const std::string& a : r.assertions)
    if (a.rfind(pass, 0) == 0 || a.rfind(fail, 0) == 0) return &a;
  return nullptr;
}

bool assertion_passed(const RunResult& r, const std::string& name) {
  const std::string* line = assertion_line(r, name);
  return line != nullptr && line->rfind("PASS ", 0) == 0;
}

// 1. Frozen unit diffusion against the exact heat flow: the implicit-split
//    update has a closed-form per-step factor, and the semigroup limit is
//    exp(-4 pi^2 t). Tolerances 1e-8 discrete, 1e-6 continuum.
Outcome criterion_heat_oracle() {
  const TorusGrid g = TorusGrid::make(1, 64);
  const CoefficientSet c = builtin_coefficients("frozen", {{"a", 1.0}});
  SolverConfig cfg;
  cfg.grid = g;
  cfg.dt = 1e-4;
  cfg.T = 0.1;
  cfg.K = 0;
  cfg.theta_split = 0.5;
  const ScalarField u0 = sine_field(g);
  const Trajectory t = integrate(c, cfg, u0, 0ull);

  const double kappa_sq = kTwoPi * kTwoPi;
  const double rho = (1.0 - cfg.dt * (1.0 - cfg.theta_split) * kappa_sq) /
                     (1.0 + cfg.dt * cfg.theta_split * kappa_sq);
  const double disc = std::pow(rho, cfg.steps());
  const double cont = std::exp(-kappa_sq * cfg.dt * cfg.steps());

  double err_disc = 0.0, err_cont = 0.0;
  for (std::size_t p = 0; p < u0.values.size(); ++p) {
    err_disc = std::max(err_disc, std::abs(t.final_state.values[p] - disc * u0.values[p]));
    err_cont = std::max(err_cont, std::abs(t.final_state.values[p] - cont * u0.values[p]));
  }
  return {err_disc <= 1e-8 && err_cont <= 1e-6,
          "discrete " + num(err_disc) + " <= 1e-8, continuum " + num(err_cont) +
              " <= 1e-6"};
}

// 2. Mollification keeps the ellipticity window: every eigenvalue of
//    A_eps(u) on the grid stays in [0.5 - 1e-10, 1.5 + 1e-10] over 1000
//    band-limited fields and eps in {0, 0.01, 0.1}.
Outcome criterion_ellipticity() {
  const TorusGrid g = TorusGrid::make(1, 64);
  const CoefficientSet c = builtin_coefficients("trig");
  const double lo_bound = 0.5 - 1e-10, hi_bound = 1.5 + 1e-10;

  long long violations = 0;
  double worst_lo = std::numeric_limits<double>::infinity(), worst_hi = 0.0;
  for (double eps : {0.0, 0.01, 0.1}) {
    const HeatSemigroup P(g, eps);
    for (int trial = 0; trial < 1000; ++trial) {
      const double amp = std::ldexp(1.0, trial % 8 - 3);
      const ScalarField u = band_field(g, 7, 31, trial, amp);
      const auto [lo, hi] = regularized_diffusion(P, c, u).eigenvalue_range();
      worst_lo = std::min(worst_lo, lo);
      worst_hi = std::max(worst_hi, hi);
      if (lo < lo_bound || hi > hi_bound) ++violations;
    }
  }
  return {violations == 0, "eigenvalues in [" + num(worst_lo) + ", " + num(worst_hi) +
                               "] over 3000 fields, " + std::to_string(violations) +
                               " violations"};
}

// 3. Semigroup laws on 1000 random fields: composition agrees with the summed
//    time to 1e-12 relative, the zero-mode multiplier is exactly one (DC
//    coefficient bit-identical; grid mean moves only by transform roundoff,
//    1e-13 relative), and L1/L2/Linf all contract.
Outcome criterion_semigroup_laws() {
  const TorusGrid g = TorusGrid::make(1, 64);
  const HeatSemigroup Pa(g, 0.01), Pb(g, 0.005), Pab(g, 0.015);

  double worst_comp = 0.0, worst_mean = 0.0, worst_contract = 0.0;
  bool dc_exact = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const double scale = std::ldexp(1.0, trial % 41 - 20);
    const double offset = trial % 3 == 0 ? 1e6 : trial % 3 == 1 ? 0.0 : 1.0;
    ScalarField u = band_field(g, 9, 32, trial, scale);
    for (double& v : u.values) v += scale * offset;
    const double sup = norm(u, Norm::Linf);

    const ScalarField two = Pa.apply(Pb.apply(u));
    const ScalarField one = Pab.apply(u);
    worst_comp = std::max(worst_comp, linf_diff(two, one) / std::max(1.0, sup));

    SpectralField su = forward_transform(u);
    const auto dc = su.coeffs[0];
    Pa.apply_inplace(su);
    dc_exact = dc_exact && su.coeffs[0].real() == dc.real() &&
               su.coeffs[0].imag() == dc.imag();
    const ScalarField au = Pa.apply(u);
    worst_mean = std::max(worst_mean,
                          std::abs(grid_mean(au) - grid_mean(u)) / std::max(1.0, sup));

    for (Norm which : {Norm::L1, Norm::L2, Norm::Linf}) {
      const double before = norm(u, which);
      if (before > 0.0)
        worst_contract = std::max(worst_contract, norm(au, which) / before);
    }
  }
  const bool ok = worst_comp <= 1e-12 && dc_exact && worst_mean <= 1e-13 &&
                  worst_contract <= 1.0 + 1e-12;
  return {ok, "composition " + num(worst_comp) + " <= 1e-12, DC " +
                  (dc_exact ? "bit-exact" : "DRIFTED") + ", mean defect " +
                  num(worst_mean) + " <= 1e-13, contraction " + num(worst_contract)};
}

// 4. The convex surrogates of |x|: for n = 1..10 a dense scan of 1e5 points
//    checks |phi'| <= 1, 0 <= phi'' <= (2/n)/|x|, the unit psi integral to
//    1e-10, the sandwich 0 <= |x| - phi <= a_{n-1}, and the breakpoints
//    against a cumulative-product oracle at 1e-14 relative.
Outcome criterion_phi_family() {
  bool ok = true;
  double worst_slope = 0.0, worst_psi = 0.0, worst_break = 0.0;
  for (int n = 1; n <= 10; ++n) {
    const PhiN p = PhiN::build(n);
    if (p.a_lo != breakpoint_a(n) || p.a_hi != breakpoint_a(n - 1)) ok = false;

    double cum = 1.0;
    for (int m = 1; m <= n; ++m) {
      cum *= std::exp(-static_cast<double>(m));
      const double rel = std::abs(breakpoint_a(m) - cum) / cum;
      worst_break = std::max(worst_break, rel);
      if (rel > 1e-14) ok = false;
    }

    worst_psi = std::max(worst_psi, std::abs(p.psi_integral - 1.0));
    if (std::abs(p.psi_integral - 1.0) > 1e-10) ok = false;

    const auto check_point = [&](double x) {
      const double ax = std::abs(x);
      const double pd = std::abs(p.phi_prime(x));
      worst_slope = std::max(worst_slope, pd);
      if (pd > 1.0) ok = false;
      const double ps = p.phi_second(x);
      if (ps < 0.0) ok = false;
      if (ax > 0.0 && ps > 2.0 / (n * ax) * (1.0 + 1e-12)) ok = false;
      const double gap = ax - p.phi(x);
      const double slack = 1e-12 * std::max(1.0, ax);
      if (gap < -slack || gap > p.a_hi + slack) ok = false;
    };
    const int half = 50000;
    for (int i = 0; i < half; ++i)
      check_point(-2.0 + 4.0 * i / (half - 1));
    const double lo = 0.5 * p.a_lo, span = std::log(10.0 / lo);
    for (int i = 0; i < half; ++i) {
      const double x = lo * std::exp(span * i / (half - 1));
      check_point(i % 2 == 0 ? x : -x);
    }
  }
  return {ok, "max |phi'| " + num(worst_slope) + ", psi defect " + num(worst_psi) +
                  " <= 1e-10, breakpoint rel " + num(worst_break) + " <= 1e-14"};
}

// 5. Local monotonicity of the mollified drift: on 1000 sampled pairs per eps
//    the probe must find delta3 > 0 with zero violations at the fitted
//    constants.
Outcome criterion_monotonicity() {
  const TorusGrid g = TorusGrid::make(1, 64);
  const CoefficientSet c = builtin_coefficients("trig");
  bool ok = true;
  std::string detail;
  for (double eps : {0.005, 0.01, 0.02}) {
    const HeatSemigroup P(g, eps);
    const MonotonicityReport rep = monotonicity_probe(c, P, 1000, g);
    ok = ok && rep.violations == 0 && rep.fitted_delta3 > 0.0;
    if (!detail.empty()) detail += "; ";
    detail += "eps " + num(eps) + ": delta3 " + num(rep.fitted_delta3) + ", " +
              std::to_string(rep.violations) + " violations";
  }
  return {ok, detail};
}

// 6. The energy-balance defect is O(dt): coupled dt halving through the
//    coarsened path multiplies the max residual by about two. Ratio pinned to
//    [1.5, 3] on three seeds.
Outcome criterion_ito_residual() {
  const TorusGrid g = TorusGrid::make(1, 64);
  const CoefficientSet c = builtin_coefficients("trig");
  const ScalarField u0 = sine_field(g);

  SolverConfig fine;
  fine.grid = g;
  fine.eps = 0.01;
  fine.dt = 2e-5;
  fine.T = 0.1;
  fine.K = 32;
  SolverConfig coarse = fine;
  coarse.dt = 2.0 * fine.dt;

  bool ok = true;
  std::string detail = "coarse/fine ratios";
  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    const auto fpath =
        std::make_shared<const NoisePath>(generate_path(seed, fine.K, fine.dt, fine.steps()));
    const auto cpath = std::make_shared<const NoisePath>(coarsen(*fpath));
    const Trajectory tf = integrate(c, fine, u0, fpath);
    const Trajectory tc = integrate(c, coarse, u0, cpath);
    double rf = 0.0, rc = 0.0;
    for (double v : tf.energy.ito_residual) rf = std::max(rf, std::abs(v));
    for (double v : tc.energy.ito_residual) rc = std::max(rc, std::abs(v));
    const double ratio = rc / rf;
    ok = ok && ratio >= 1.5 && ratio <= 3.0;
    detail += " " + num(ratio);
  }
  return {ok, detail + " in [1.5, 3]"};
}

// 7 and 8 share one 64-seed coupled eps sweep; criterion 7 reads the five
// monitor columns, criterion 8 the Cauchy column and the stopped rate fit.
RunResult shared_sweep() {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::sweep_eps;
  cfg.coeff_name = "trig";
  cfg.n = 64;
  cfg.eps_grid = {0.02, 0.01, 0.005, 0.0025};
  cfg.dt = 5e-5;
  cfg.T = 0.5;
  cfg.K = 32;
  cfg.M_threshold = 25.0;
  cfg.u0_kind = "sine";
  cfg.monitor_factor = 2.0;
  cfg.seeds.clear();
  for (std::uint64_t s = 1; s <= 64; ++s) cfg.seeds.push_back(s);

  const auto dir = std::filesystem::temp_directory_path() / "spde_acceptance" / "sweep";
  std::filesystem::remove_all(dir);
  return run_experiment(cfg, dir.string());
}

Outcome criterion_uniform_monitors(const RunResult& sweep) {
  const char* names[] = {"monitor_ratio_sup_h_norm_sq", "monitor_ratio_h1_integral",
                         "monitor_ratio_sup_l4_pow4", "monitor_ratio_sup_grad_linf_sq",
                         "monitor_ratio_holder"};
  bool ok = true;
  std::string detail;
  for (const char* name : names) {
    ok = ok && assertion_passed(sweep, name);
    const std::string* line = assertion_line(sweep, name);
    if (line == nullptr) {
      ok = false;
    } else if (line->rfind("FAIL", 0) == 0) {
      detail += (detail.empty() ? "" : "; ") + *line;
    }
  }
  if (detail.empty()) detail = "all 5 Monte Carlo monitor columns within factor 2";
  return {ok, detail};
}

Outcome criterion_cauchy_rate(const RunResult& sweep) {
  bool ok = true;
  std::string detail;
  for (const char* name :
       {"stopped_leq_unstopped", "cauchy_monotone", "rate_exponent_positive", "rate_fit_r2"}) {
    ok = ok && assertion_passed(sweep, name);
    if (const std::string* line = assertion_line(sweep, name)) {
      if (!detail.empty()) detail += "; ";
      detail += line->substr(5);
    } else {
      ok = false;
    }
  }
  return {ok, detail};
}

// 9. Pathwise uniqueness at desk scale: a twin run under one path is
//    bit-identical, and the perturbed pair admits the C/n + e^{lambda T} gap
//    bound with C <= 1 over n in {2, 4, 8} and 32 seeds.
Outcome criterion_uniqueness() {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::uniqueness;
  cfg.coeff_name = "trig";
  cfg.n = 64;
  cfg.dt = 5e-5;
  cfg.T = 0.25;
  cfg.K = 32;
  cfg.u0_kind = "sine";
  cfg.u0_gap = 1e-3;
  cfg.n_list = {2, 4, 8};
  cfg.seeds.clear();
  for (std::uint64_t s = 1; s <= 32; ++s) cfg.seeds.push_back(s);

  const auto dir = std::filesystem::temp_directory_path() / "spde_acceptance" / "uniq";
  std::filesystem::remove_all(dir);
  const RunResult res = run_experiment(cfg, dir.string());

  bool ok = true;
  std::string detail;
  for (const char* name : {"twin_bit_identical", "twin_zero_gap", "uniqueness_bound_feasible"}) {
    ok = ok && assertion_passed(res, name);
    if (const std::string* line = assertion_line(res, name)) {
      if (!detail.empty()) detail += "; ";
      detail += line->substr(5);
    } else {
      ok = false;
    }
  }
  return {ok, detail};
}

// 10. Weak-form residual: exactly zero (to 1e-12) on a constant solution and
//     O(dt) under deterministic halving, ratio in [1.5, 3].
Outcome criterion_weak_residual() {
  const TorusGrid g = TorusGrid::make(1, 64);
  const CoefficientSet c = builtin_coefficients("trig", {{"b", 0.4}});
  SolverConfig cfg;
  cfg.grid = g;
  cfg.eps = 0.01;
  cfg.dt = 4e-5;
  cfg.T = 0.05;
  cfg.K = 0;
  cfg.snapshot_stride = 1;

  const Trajectory flat = integrate(c, cfg, ScalarField::constant(g, 0.7), 0ull);
  const WeakResidualReport wr = weak_residual(flat, c, 8);

  const ScalarField u0 = sine_field(g);
  const auto residual_at = [&](double dt) {
    SolverConfig s = cfg;
    s.dt = dt;
    return weak_residual(integrate(c, s, u0, 0ull), c, 8).max_residual;
  };
  const double r_coarse = residual_at(4e-5);
  const double r_fine = residual_at(2e-5);
  const double ratio = r_coarse / r_fine;

  const bool ok = wr.max_residual <= 1e-12 && !wr.quadrature_degraded && ratio >= 1.5 &&
                  ratio <= 3.0;
  return {ok, "constant " + num(wr.max_residual) + " <= 1e-12, halving ratio " +
                  num(ratio) + " in [1.5, 3]"};
}

// 11. Noise statistics: 1e5 unit-dt increments inside four-sigma mean and
//     variance bands, and the Ito isometry E||sigma(u) dW||_H^2 = dt tr within
//     three Monte Carlo standard errors at 1e4 samples.
Outcome criterion_noise_statistics() {
  const int N = 100000;
  const NoisePath unit = generate_path(2026, 1, 1.0, N);
  double mean = 0.0;
  for (int m = 0; m < N; ++m) mean += unit.increment(m, 1);
  mean /= N;
  double var = 0.0;
  for (int m = 0; m < N; ++m) {
    const double d = unit.increment(m, 1) - mean;
    var += d * d;
  }
  var /= N - 1;
  const double mean_band = 4.0 / std::sqrt(static_cast<double>(N));
  const double var_band = 4.0 * std::sqrt(2.0 / (N - 1));
  const bool stats_ok = std::abs(mean) <= mean_band && std::abs(var - 1.0) <= var_band;

  const TorusGrid g = TorusGrid::make(1, 64);
  const CoefficientSet c = builtin_coefficients("trig");
  const ScalarField u = sine_field(g);
  const int K = 16, samples = 10000;
  const double dt = 1e-3;
  const NoisePath path = generate_path(2027, K, dt, samples);

  // dt * sum_k ||sigma_k(u) e_k||_H^2 by the same grid quadrature the solver
  // logs use.
  const NoiseBasis& basis = NoiseBasis::shared(g, K);
  const double cell = g.h();
  std::vector<double> row(K);
  double trace = 0.0;
  for (std::size_t p = 0; p < u.values.size(); ++p) {
    c.eval_sigma_row(u.values[p], K, row.data());
    for (int k = 0; k < K; ++k) {
      const double s = row[static_cast<std::size_t>(k)] *
                       basis.fields[static_cast<std::size_t>(k)].values[p];
      trace += s * s * cell;
    }
  }
  const double target = dt * trace;

  double sum = 0.0, sum_sq = 0.0;
  for (int m = 0; m < samples; ++m) {
    const double nrm = norm(noise_increment(c, u, path, m), Norm::L2);
    sum += nrm * nrm;
    sum_sq += nrm * nrm * nrm * nrm;
  }
  const double iso_mean = sum / samples;
  const double iso_var = (sum_sq - samples * iso_mean * iso_mean) / (samples - 1);
  const double se = std::sqrt(iso_var / samples);
  const bool iso_ok = std::abs(iso_mean - target) <= 3.0 * se;

  return {stats_ok && iso_ok,
          "mean " + num(mean) + " (band " + num(mean_band) + "), var " + num(var) +
              " (band 1 +- " + num(var_band) + "), isometry defect " +
              num(std::abs(iso_mean - target)) + " <= 3 SE " + num(3.0 * se)};
}

Outcome guarded(Outcome (*fn)()) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

int main() {
  // Artifact names below must not depend on the ambient seed offset.
  unsetenv("SPDE_SEED_OFFSET");

  struct Row {
    const char* name;
    Outcome out;
  };
  std::vector<Row> rows;
  rows.push_back({"heat oracle", guarded(criterion_heat_oracle)});
  rows.push_back({"ellipticity preserved", guarded(criterion_ellipticity)});
  rows.push_back({"semigroup laws", guarded(criterion_semigroup_laws)});
  rows.push_back({"phi_n certification", guarded(criterion_phi_family)});
  rows.push_back({"local monotonicity", guarded(criterion_monotonicity)});
  rows.push_back({"ito residual halving", guarded(criterion_ito_residual)});

  Outcome monitors, cauchy;
  try {
    const RunResult sweep = shared_sweep();
    monitors = criterion_uniform_monitors(sweep);
    cauchy = criterion_cauchy_rate(sweep);
  } catch (const std::exception& e) {
    monitors = cauchy = {false, std::string("exception: ") + e.what()};
  }
  rows.push_back({"uniform monitors", monitors});
  rows.push_back({"cauchy convergence", cauchy});

  rows.push_back({"pathwise uniqueness", guarded(criterion_uniqueness)});
  rows.push_back({"weak residual", guarded(criterion_weak_residual)});
  rows.push_back({"noise statistics", guarded(criterion_noise_statistics)});

  int failures = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    if (!r.out.ok) ++failures;
    std::printf("%s criterion %2zu %-22s %s\n", r.out.ok ? "PASS" : "FAIL", i + 1,
                r.name, r.out.detail.c_str());
  }
  std::printf("acceptance: %zu/%zu criteria passed\n", rows.size() - failures,
              rows.size());
  return failures == 0 ? 0 : 1;
}
