#include "spde/uniqueness.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace spde {

namespace {

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double fa, double fm, double fb, double whole, double tol,
                        int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate_gap(const std::function<double(double)>& f, double a, double b,
                     double tol) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 24);
}

double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  if (it == xs.begin()) return ys.front();
  if (it == xs.end()) return ys.back();
  const std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
  const double t = (x - xs[i]) / (xs[i + 1] - xs[i]);
  return ys[i] + t * (ys[i + 1] - ys[i]);
}

}  // namespace

double breakpoint_a(int m) {
  if (m < 0) throw std::invalid_argument("breakpoint_a: m must be nonnegative");
  return std::exp(-0.5 * static_cast<double>(m) * (m + 1));
}

double PhiN::psi(double u) const {
  if (!(u > a_lo) || !(u < a_hi)) return 0.0;
  return 1.0 / (n * u);
}

double PhiN::phi_prime(double x) const {
  const double ax = std::abs(x);
  if (ax <= a_lo) return 0.0;
  const double v = ax >= a_hi ? 1.0 : interp(knots, dphi, ax);
  return x < 0.0 ? -v : v;
}

double PhiN::phi(double x) const {
  const double ax = std::abs(x);
  if (ax <= a_lo) return 0.0;
  if (ax >= a_hi) return ax - c_shift;
  return interp(knots, phi_tab, ax);
}

double PhiN::phi_second(double x) const { return psi(std::abs(x)); }

PhiN PhiN::build(int n) {
  if (n < 1) throw std::invalid_argument("PhiN: n must be at least 1");
  PhiN p;
  p.n = n;
  p.a_lo = breakpoint_a(n);
  p.a_hi = breakpoint_a(n - 1);

  // Log-spaced knots: the piecewise-linear error of phi' is (r-1)^2 / (8n)
  // per gap, so the ratio r is chosen for 1e-10 and the count clamped.
  const double target_ratio = std::sqrt(8.0 * n * 1e-10);
  const long long raw = static_cast<long long>(std::ceil(n / target_ratio));
  const int count = static_cast<int>(std::clamp(raw, 1024ll, 300000ll));
  p.knots.resize(static_cast<std::size_t>(count) + 1);
  for (int i = 0; i <= count; ++i)
    p.knots[static_cast<std::size_t>(i)] =
        p.a_lo * std::exp(static_cast<double>(n) * i / count);
  p.knots.front() = p.a_lo;
  p.knots.back() = p.a_hi;

  const std::function<double(double)> psi_fn = [&p](double u) { return p.psi(u); };
  p.dphi.resize(p.knots.size());
  p.dphi[0] = 0.0;
  const double gap_tol = 1e-13 / count;
  for (std::size_t i = 0; i + 1 < p.knots.size(); ++i)
    p.dphi[i + 1] = p.dphi[i] + integrate_gap(psi_fn, p.knots[i], p.knots[i + 1], gap_tol);
  p.psi_integral = p.dphi.back();
  // The exact antiderivative never exceeds one; quadrature overshoot must not
  // leak into phi'.
  for (double& v : p.dphi) v = std::min(v, 1.0);

  p.phi_tab.resize(p.knots.size());
  p.phi_tab[0] = 0.0;
  for (std::size_t i = 0; i + 1 < p.knots.size(); ++i)
    p.phi_tab[i + 1] = p.phi_tab[i] +
                       0.5 * (p.dphi[i] + p.dphi[i + 1]) * (p.knots[i + 1] - p.knots[i]);
  p.c_shift = p.a_hi - p.phi_tab.back();
  return p;
}

double big_phi(const PhiN& p, const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values) s += p.phi(v);
  return s * std::pow(f.grid.h(), f.grid.dim);
}

UniquenessRun uniqueness_experiment(const CoefficientSet& c, const SolverConfig& cfg,
                                    const ScalarField& u0_a, const ScalarField& u0_b,
                                    std::shared_ptr<const NoisePath> path,
                                    std::span<const int> n_list) {
  if (!(u0_a.grid == cfg.grid) || !(u0_b.grid == cfg.grid))
    throw std::invalid_argument("uniqueness_experiment: initial data grid mismatch");
  if (n_list.empty())
    throw std::invalid_argument("uniqueness_experiment: empty n list");

  const Trajectory ta = integrate(c, cfg, u0_a, path);
  const Trajectory tb = integrate(c, cfg, u0_b, path);
  if (ta.noise_checksum != tb.noise_checksum)
    throw std::runtime_error("uniqueness_experiment: noise checksums differ between runs");

  std::vector<PhiN> phis;
  phis.reserve(n_list.size());
  for (int n : n_list) phis.push_back(PhiN::build(n));

  UniquenessRun run;
  run.times = ta.times;
  run.checksum_a = trajectory_checksum(ta);
  run.checksum_b = trajectory_checksum(tb);
  run.big_phi_series.assign(n_list.size(), {});

  ScalarField diff = ScalarField::zeros(cfg.grid);
  run.bit_identical = true;
  for (std::size_t j = 0; j < ta.snapshots.size(); ++j) {
    const ScalarField& ua = ta.snapshots[j];
    const ScalarField& ub = tb.snapshots[j];
    if (ua.values != ub.values) run.bit_identical = false;
    for (std::size_t p = 0; p < diff.values.size(); ++p)
      diff.values[p] = ua.values[p] - ub.values[p];
    run.max_h_gap = std::max(run.max_h_gap, norm(diff, Norm::L2));
    for (std::size_t ni = 0; ni < phis.size(); ++ni)
      run.big_phi_series[ni].push_back(big_phi(phis[ni], diff));
  }
  if (ta.final_state.values != tb.final_state.values) run.bit_identical = false;
  return run;
}

UniquenessReport uniqueness_study(const CoefficientSet& c, const SolverConfig& cfg,
                                  const ScalarField& u0_a, const ScalarField& u0_b,
                                  std::span<const std::uint64_t> seeds,
                                  std::span<const int> n_list, double feasibility_cap) {
  if (seeds.empty()) throw std::invalid_argument("uniqueness_study: no seeds");

  UniquenessReport rep;
  rep.n_list.assign(n_list.begin(), n_list.end());
  rep.seeds = static_cast<int>(seeds.size());

  ScalarField gap_field = u0_a;
  for (std::size_t p = 0; p < gap_field.values.size(); ++p)
    gap_field.values[p] -= u0_b.values[p];
  rep.l1_gap_u0 = norm(gap_field, Norm::L1);

  std::vector<std::vector<double>> sum, sum_sq;
  for (std::size_t si = 0; si < seeds.size(); ++si) {
    std::shared_ptr<const NoisePath> path;
    if (cfg.K > 0)
      path = std::make_shared<const NoisePath>(
          generate_path(seeds[si], cfg.K, cfg.dt, cfg.steps()));
    const UniquenessRun run =
        uniqueness_experiment(c, cfg, u0_a, u0_b, std::move(path), n_list);
    if (si == 0) {
      rep.times = run.times;
      sum.assign(n_list.size(), std::vector<double>(run.times.size(), 0.0));
      sum_sq = sum;
    }
    for (std::size_t ni = 0; ni < n_list.size(); ++ni)
      for (std::size_t t = 0; t < run.times.size(); ++t) {
        const double v = run.big_phi_series[ni][t];
        sum[ni][t] += v;
        sum_sq[ni][t] += v * v;
      }
  }

  const double N = static_cast<double>(seeds.size());
  rep.mean_big_phi.assign(n_list.size(), std::vector<double>(rep.times.size(), 0.0));
  rep.stderr_big_phi = rep.mean_big_phi;
  for (std::size_t ni = 0; ni < n_list.size(); ++ni)
    for (std::size_t t = 0; t < rep.times.size(); ++t) {
      const double mean = sum[ni][t] / N;
      rep.mean_big_phi[ni][t] = mean;
      if (seeds.size() > 1) {
        const double var =
            std::max(0.0, (sum_sq[ni][t] - N * mean * mean) / (N - 1.0));
        rep.stderr_big_phi[ni][t] = std::sqrt(var / N);
      }
    }

  // Bound-shape fit over lambda in [0, 8].
  const double horizon = rep.times.back();
  double best_C = std::numeric_limits<double>::infinity();
  double best_lambda = 0.0;
  for (int jl = 0; jl <= 256; ++jl) {
    const double lambda = 8.0 * jl / 256.0;
    const double growth = std::exp(lambda * horizon) * rep.l1_gap_u0;
    double need = 0.0;
    for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
      const double excess = rep.mean_big_phi[ni].back() - growth;
      need = std::max(need, n_list[ni] * std::max(0.0, excess));
    }
    if (need < best_C) {
      best_C = need;
      best_lambda = lambda;
    }
  }
  rep.fitted_C = best_C;
  rep.fitted_lambda = best_lambda;
  rep.feasible = best_C <= feasibility_cap;
  return rep;
}

}  // namespace spde
