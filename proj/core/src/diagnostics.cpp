#include "spde/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "spde/noise.hpp"
#include "spde/rng.hpp"

namespace spde {

namespace {

double physical_pairing(const ScalarField& a, const ScalarField& b) {
  double s = 0.0;
  for (std::size_t p = 0; p < a.values.size(); ++p) s += a.values[p] * b.values[p];
  return s * std::pow(a.grid.h(), a.grid.dim);
}

// Gaussian mix of the first 2*kmax+1 real Fourier modes, H-norm near amp.
ScalarField random_band_field(const TorusGrid& g, int kmax, double amp,
                              std::uint64_t seed, std::uint64_t salt) {
  const int K = 2 * kmax + 1;
  const NoiseBasis& basis = NoiseBasis::shared(g, K);
  ScalarField f = ScalarField::zeros(g);
  const double scale = amp / std::sqrt(static_cast<double>(K));
  for (int k = 0; k < K; ++k) {
    const double ck = scale * rng::gaussian(seed, salt, static_cast<std::uint64_t>(k));
    const ScalarField& e = basis.fields[static_cast<std::size_t>(k)];
    for (std::size_t p = 0; p < f.values.size(); ++p) f.values[p] += ck * e.values[p];
  }
  return f;
}

ScalarField clamp_field(const ScalarField& u, double R) {
  ScalarField out = u;
  for (double& v : out.values) v = std::clamp(v, -R, R);
  return out;
}

int effective_stride(const Trajectory& traj) {
  if (traj.times.size() < 2) return 1;
  return std::max(1, static_cast<int>(std::llround(
                         (traj.times[1] - traj.times[0]) / traj.config.dt)));
}

}  // namespace

std::vector<double> ito_energy_residual(const Trajectory& traj, const CoefficientSet& c) {
  if (traj.config.grid.dim != c.dim)
    throw std::invalid_argument("ito_energy_residual: coefficient dimension mismatch");
  const EnergyReport& e = traj.energy;
  if (e.h_norm_sq.empty())
    throw std::invalid_argument("ito_energy_residual: trajectory has no energy log");
  const std::size_t steps = e.h_norm_sq.size() - 1;
  if (e.drift_pairing.size() != steps || e.martingale.size() != steps ||
      e.trace_step.size() != steps)
    throw std::invalid_argument(
        "ito_energy_residual: martingale log missing or truncated");

  std::vector<double> residual(steps + 1, 0.0);
  double balance = 0.0;
  for (std::size_t m = 1; m <= steps; ++m) {
    balance += e.drift_pairing[m - 1] + e.martingale[m - 1] + e.trace_step[m - 1];
    residual[m] = e.h_norm_sq[m] - e.h_norm_sq[0] - balance;
  }
  return residual;
}

MonotonicityReport monotonicity_probe(const CoefficientSet& c, const HeatSemigroup& P,
                                      int samples, const TorusGrid& grid,
                                      std::uint64_t seed) {
  if (samples < 500)
    throw std::invalid_argument("monotonicity_probe: need at least 500 samples");
  if (!(P.grid() == grid))
    throw std::invalid_argument("monotonicity_probe: semigroup grid mismatch");
  if (grid.dim != c.dim)
    throw std::invalid_argument("monotonicity_probe: coefficient dimension mismatch");

  static constexpr double kAmps[] = {0.05, 0.2, 0.5, 1.0, 2.0};
  static constexpr int kBands[] = {2, 3, 5};

  std::vector<double> pairings(static_cast<std::size_t>(samples));
  std::vector<double> f2(pairings.size()), f3(pairings.size()), f4(pairings.size());

  for (int i = 0; i < samples; ++i) {
    const double amp_u = kAmps[i % 5];
    const double amp_v = kAmps[(i / 5) % 5];
    const int kmax = std::min(kBands[(i / 25) % 3], grid.n / 4);
    const std::uint64_t row = static_cast<std::uint64_t>(i);
    ScalarField u = random_band_field(grid, kmax, amp_u, seed, 2 * row);
    ScalarField v = i % 97 == 0 ? u : random_band_field(grid, kmax, amp_v, seed, 2 * row + 1);

    ScalarField w = u;
    for (std::size_t p = 0; p < w.values.size(); ++p) w.values[p] -= v.values[p];

    const ScalarField Fu = apply_drift(c, P, u);
    const ScalarField Fv = apply_drift(c, P, v);
    ScalarField dF = Fu;
    for (std::size_t p = 0; p < dF.values.size(); ++p) dF.values[p] -= Fv.values[p];

    const double pairing = physical_pairing(dF, w);
    const double w_h = norm(w, Norm::L2);
    const double w_h1 = norm(w, Norm::H1);
    const double v_h1 = norm(v, Norm::H1);
    if (!std::isfinite(pairing)) {
      std::ostringstream os;
      os << "monotonicity_probe: non-finite pairing at sample " << i
         << " (|u|_H1 = " << norm(u, Norm::H1) << ", |v|_H1 = " << v_h1 << ")";
      throw std::runtime_error(os.str());
    }
    const std::size_t idx = static_cast<std::size_t>(i);
    pairings[idx] = pairing;
    f2[idx] = w_h * w_h;
    f3[idx] = f2[idx] * v_h1 * v_h1;
    f4[idx] = w_h1 * w_h1;
  }

  // Feasibility sweep: for each delta3, the smallest admissible C is the max
  // of (pairing + delta3 f4) / (1 + f2 + f3) over the sample; pick the knee.
  constexpr int kGrid = 40;
  double best_delta3 = 0.0, best_C = 0.0, min_C = 0.0;
  std::vector<double> c_req(kGrid);
  for (int jg = 0; jg < kGrid; ++jg) {
    const double d3 = c.delta * (jg + 1) / kGrid;
    double need = 0.0;
    for (std::size_t i = 0; i < pairings.size(); ++i)
      need = std::max(need, (pairings[i] + d3 * f4[i]) / (1.0 + f2[i] + f3[i]));
    c_req[static_cast<std::size_t>(jg)] = need;
  }
  min_C = *std::min_element(c_req.begin(), c_req.end());
  const double ceiling = min_C + std::max(1.0, min_C);
  for (int jg = kGrid - 1; jg >= 0; --jg) {
    if (c_req[static_cast<std::size_t>(jg)] <= ceiling) {
      best_delta3 = c.delta * (jg + 1) / kGrid;
      best_C = c_req[static_cast<std::size_t>(jg)];
      break;
    }
  }
  if (best_C > 1e6) {
    std::size_t worst = 0;
    for (std::size_t i = 0; i < pairings.size(); ++i)
      if (pairings[i] > pairings[worst]) worst = i;
    std::ostringstream os;
    os << "monotonicity_probe: no usable (C, delta3) pair; worst sample " << worst
       << " has pairing " << pairings[worst] << " with |w|_H^2 = " << f2[worst]
       << ", |w|_H1^2 = " << f4[worst];
    throw std::runtime_error(os.str());
  }

  MonotonicityReport rep;
  rep.sampled_pairs = samples;
  rep.fitted_delta3 = best_delta3;
  rep.fitted_C = best_C;
  rep.violations = 0;
  for (std::size_t i = 0; i < pairings.size(); ++i) {
    const double bound = best_C * (1.0 + f2[i] + f3[i]) - best_delta3 * f4[i];
    if (pairings[i] - bound > 1e-12 * (1.0 + std::abs(bound))) ++rep.violations;
  }
  return rep;
}

WeakResidualReport weak_residual(const Trajectory& traj, const CoefficientSet& c,
                                 int tests) {
  if (tests < 5) throw std::invalid_argument("weak_residual: need at least 5 test functions");
  if (traj.snapshots.size() < 2)
    throw std::invalid_argument("weak_residual: trajectory stores too few snapshots");
  const TorusGrid& g = traj.config.grid;
  if (g.dim != c.dim)
    throw std::invalid_argument("weak_residual: coefficient dimension mismatch");
  if (traj.config.K > 0 && !traj.path)
    throw std::invalid_argument("weak_residual: noise path not retained by the trajectory");

  const double dt = traj.config.dt;
  const double R = traj.config.clip_R;
  const std::size_t np = g.points();
  const std::size_t S = traj.snapshots.size();
  const HeatSemigroup P(g, traj.config.eps);
  const int K = traj.config.K;
  const NoiseBasis* nb = K > 0 ? &NoiseBasis::shared(g, K) : nullptr;

  // The residual is linear in phi, so aggregate the time quadrature once.
  std::vector<ScalarField> diff_sum(static_cast<std::size_t>(g.dim), ScalarField::zeros(g));
  std::vector<ScalarField> conv_sum(static_cast<std::size_t>(g.dim), ScalarField::zeros(g));
  ScalarField noise_sum = ScalarField::zeros(g);
  std::vector<double> row(static_cast<std::size_t>(std::max(K, 1)));
  std::vector<double> db_sum(static_cast<std::size_t>(std::max(K, 1)));

  for (std::size_t j = 0; j + 1 < S; ++j) {
    const ScalarField& u = traj.snapshots[j];
    const double dtj = traj.times[j + 1] - traj.times[j];
    const ScalarField ucl = clamp_field(u, R);
    const std::vector<ScalarField> grads = gradient(u);
    const MatrixField A = regularized_diffusion(P, c, ucl);
    for (int i = 0; i < g.dim; ++i) {
      for (std::size_t p = 0; p < np; ++p) {
        double v = 0.0;
        for (int jx = 0; jx < g.dim; ++jx) v += A.entry(p, i, jx) * grads[static_cast<std::size_t>(jx)].values[p];
        diff_sum[static_cast<std::size_t>(i)].values[p] += dtj * v;
        conv_sum[static_cast<std::size_t>(i)].values[p] +=
            dtj * c.B(ucl.values[p])[static_cast<std::size_t>(i)];
      }
    }
    if (K > 0) {
      const int m_lo = static_cast<int>(std::llround(traj.times[j] / dt));
      const int m_hi = static_cast<int>(std::llround(traj.times[j + 1] / dt));
      std::fill(db_sum.begin(), db_sum.end(), 0.0);
      for (int m = m_lo; m < m_hi; ++m)
        for (int k = 0; k < K; ++k)
          db_sum[static_cast<std::size_t>(k)] +=
              traj.path->increments[static_cast<std::size_t>(m) * K + k];
      for (std::size_t p = 0; p < np; ++p) {
        c.eval_sigma_row(ucl.values[p], K, row.data());
        double acc = 0.0;
        for (int k = 0; k < K; ++k)
          acc += row[static_cast<std::size_t>(k)] *
                 nb->fields[static_cast<std::size_t>(k)].values[p] *
                 db_sum[static_cast<std::size_t>(k)];
        noise_sum.values[p] += acc;
      }
    }
  }

  ScalarField endpoint_diff = traj.final_state;
  for (std::size_t p = 0; p < np; ++p) endpoint_diff.values[p] -= traj.snapshots[0].values[p];

  const NoiseBasis& phis = NoiseBasis::shared(g, tests);
  WeakResidualReport rep;
  rep.test_functions = tests;
  rep.dt = dt;
  rep.h = g.h();
  rep.quadrature_degraded = effective_stride(traj) > 1;
  rep.residuals.reserve(static_cast<std::size_t>(tests));
  for (int t = 0; t < tests; ++t) {
    const ScalarField& phi = phis.fields[static_cast<std::size_t>(t)];
    const std::vector<ScalarField> gphi = gradient(phi);
    double r = physical_pairing(endpoint_diff, phi) - physical_pairing(noise_sum, phi);
    for (int i = 0; i < g.dim; ++i) {
      r += physical_pairing(diff_sum[static_cast<std::size_t>(i)], gphi[static_cast<std::size_t>(i)]);
      r -= physical_pairing(conv_sum[static_cast<std::size_t>(i)], gphi[static_cast<std::size_t>(i)]);
    }
    rep.residuals.push_back(r);
    rep.max_residual = std::max(rep.max_residual, std::abs(r));
  }
  return rep;
}

std::array<const char*, 5> monitor_column_names() {
  return {"sup_h_norm_sq", "h1_integral", "sup_l4_pow4", "sup_grad_linf_sq", "holder"};
}

MonitorTable uniform_monitor(std::span<const Trajectory> trajs, double factor, double eta) {
  if (trajs.empty()) throw std::invalid_argument("uniform_monitor: no trajectories");

  const Trajectory& ref = trajs[0];
  std::vector<double> eps_order;
  std::vector<std::vector<const Trajectory*>> groups;
  for (const Trajectory& t : trajs) {
    if (!(t.config.grid == ref.config.grid) || t.config.dt != ref.config.dt)
      throw std::invalid_argument("uniform_monitor: grid or dt differs across trajectories");
    if (t.snapshots.empty() || ref.snapshots.empty() ||
        t.snapshots[0].values != ref.snapshots[0].values)
      throw std::invalid_argument("uniform_monitor: initial data differs across trajectories");
    const auto it = std::find(eps_order.begin(), eps_order.end(), t.config.eps);
    if (it == eps_order.end()) {
      eps_order.push_back(t.config.eps);
      groups.emplace_back();
      groups.back().push_back(&t);
    } else {
      groups[static_cast<std::size_t>(it - eps_order.begin())].push_back(&t);
    }
  }

  std::vector<std::uint64_t> ref_sums;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    if (groups[gi].size() != groups[0].size())
      throw std::invalid_argument("uniform_monitor: uneven seed counts across eps groups");
    std::vector<std::uint64_t> sums;
    for (const Trajectory* t : groups[gi]) sums.push_back(t->noise_checksum);
    std::sort(sums.begin(), sums.end());
    if (gi == 0)
      ref_sums = sums;
    else if (sums != ref_sums)
      throw std::invalid_argument("uniform_monitor: noise checksums differ (not a coupled family)");
  }

  MonitorTable table;
  table.eps = eps_order;
  table.factor = factor;
  table.per_group = static_cast<int>(groups[0].size());
  HolderOptions hopt;
  hopt.eta = eta;
  for (const auto& group : groups) {
    std::array<double, 5> mean{};
    for (const Trajectory* t : group) {
      const EnergyReport& e = t->energy;
      mean[0] += *std::max_element(e.h_norm_sq.begin(), e.h_norm_sq.end());
      mean[1] += e.h1_integral.back();
      mean[2] += *std::max_element(e.l4_pow4.begin(), e.l4_pow4.end());
      const double gs = *std::max_element(e.grad_sup.begin(), e.grad_sup.end());
      mean[3] += gs * gs;
      mean[4] += holder_seminorm(t->times, t->snapshots, hopt);
    }
    for (double& v : mean) v /= static_cast<double>(group.size());
    table.columns.push_back(mean);
  }

  table.pass = true;
  for (int col = 0; col < 5; ++col) {
    double lo = table.columns[0][static_cast<std::size_t>(col)];
    double hi = lo;
    for (const auto& mean : table.columns) {
      lo = std::min(lo, mean[static_cast<std::size_t>(col)]);
      hi = std::max(hi, mean[static_cast<std::size_t>(col)]);
    }
    double ratio = 1.0;
    if (hi != lo) ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    table.ratio[static_cast<std::size_t>(col)] = ratio;
    if (!(ratio <= factor)) table.pass = false;
  }
  return table;
}

OperatorBoundReport operator_bound_probe(const CoefficientSet& c, const HeatSemigroup& P,
                                         int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("operator_bound_probe: samples must be positive");
  const TorusGrid& g = P.grid();
  if (g.dim != c.dim)
    throw std::invalid_argument("operator_bound_probe: coefficient dimension mismatch");
  const std::vector<double> sym = gradient_symbol_sq(g);

  static constexpr double kAmps[] = {0.1, 0.5, 1.0, 2.0, 5.0};
  OperatorBoundReport rep;
  rep.samples = samples;
  double worst_gap = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double amp = kAmps[i % 5];
    const int kmax = std::min(2 + (i / 5) % 7, g.n / 4);
    ScalarField u = random_band_field(g, kmax, amp, seed, static_cast<std::uint64_t>(i));

    const SpectralField fhat = forward_transform(apply_drift(c, P, u));
    double dual = 0.0;
    for (std::size_t j = 0; j < fhat.coeffs.size(); ++j)
      dual += std::norm(fhat.coeffs[j]) / (1.0 + sym[j]);
    const double ratio = std::sqrt(dual) / (1.0 + norm(u, Norm::H1));
    rep.C_fit = std::max(rep.C_fit, ratio);

    const SpectralField raw = forward_transform(apply_drift(c, P, u, false));
    double total = 0.0, band = 0.0;
    for (std::size_t j = 0; j < raw.coeffs.size(); ++j) {
      const double mass = std::norm(raw.coeffs[j]) / (1.0 + sym[j]);
      total += mass;
      bool kept = true;
      for (int ax = 0; ax < g.dim; ++ax) {
        const int slot = g.dim == 1 ? static_cast<int>(j)
                                    : (ax == 0 ? static_cast<int>(j) / g.n
                                               : static_cast<int>(j) % g.n);
        if (3 * std::abs(wavenumber(slot, g.n)) >= g.n) kept = false;
      }
      if (!kept) band += mass;
    }
    if (total > 0.0) worst_gap = std::max(worst_gap, band / total);
  }
  rep.truncation_gap = worst_gap;
  return rep;
}

TauReport tau_scan(const Trajectory& traj, double M, double eta) {
  if (!(M > 0.0)) throw std::invalid_argument("tau_scan: M must be positive");
  const EnergyReport& e = traj.energy;
  if (e.grad_sup.empty()) throw std::invalid_argument("tau_scan: trajectory has no grad log");

  TauReport rep;
  rep.tau_time = traj.times.back();
  rep.stop_snapshot = static_cast<int>(traj.times.size()) - 1;

  double grad_time = -1.0;
  for (std::size_t m = 0; m < e.grad_sup.size(); ++m)
    if (e.grad_sup[m] >= M) {
      grad_time = static_cast<double>(m) * traj.config.dt;
      break;
    }

  double holder_time = -1.0;
  HolderOptions hopt;
  hopt.eta = eta;
  for (std::size_t j = 1; j < traj.snapshots.size(); ++j) {
    const double h = holder_seminorm(std::span(traj.times.data(), j + 1),
                                     std::span(traj.snapshots.data(), j + 1), hopt);
    if (h >= M) {
      holder_time = traj.times[j];
      break;
    }
  }

  double tau = -1.0;
  if (grad_time >= 0.0 && (holder_time < 0.0 || grad_time <= holder_time)) {
    tau = grad_time;
    rep.trigger = "grad";
  } else if (holder_time >= 0.0) {
    tau = holder_time;
    rep.trigger = "holder";
  }
  if (tau >= 0.0) {
    rep.hit = true;
    rep.tau_time = std::min(tau, traj.times.back());
    int idx = 0;
    while (idx + 1 < static_cast<int>(traj.times.size()) &&
           traj.times[static_cast<std::size_t>(idx) + 1] <= rep.tau_time + 1e-12)
      ++idx;
    rep.stop_snapshot = idx;
  }
  return rep;
}

}  // namespace spde
