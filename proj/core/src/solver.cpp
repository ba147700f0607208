#include "spde/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace spde {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int axis_slot(const TorusGrid& g, std::size_t j, int axis) {
  if (g.dim == 1) return static_cast<int>(j);
  return axis == 0 ? static_cast<int>(j) / g.n : static_cast<int>(j) % g.n;
}

// Re <a, b> under the 1/N-scaled transform equals the physical pairing
// h^dim sum a(x) b(x) for real fields (Parseval).
double pairing(const SpectralField& a, const SpectralField& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.coeffs.size(); ++j)
    s += a.coeffs[j].real() * b.coeffs[j].real() + a.coeffs[j].imag() * b.coeffs[j].imag();
  return s;
}

double coeff_theta(const SolverConfig& cfg, const CoefficientSet& c) {
  return cfg.theta_split > 0.0 ? cfg.theta_split : c.delta;
}

// Project onto Hermitian-symmetric spectra. The state update multiplies the
// previous coefficients by exactly one, so anti-Hermitian rounding from the
// increment transforms would otherwise persist undamped while the real signal
// decays under it.
void symmetrize(SpectralField& s) {
  const std::size_t n = static_cast<std::size_t>(s.grid.n);
  const bool two = s.grid.dim == 2;
  for (std::size_t j = 0; j < s.coeffs.size(); ++j) {
    std::size_t jc;
    if (two) {
      const std::size_t j0 = j / n, j1 = j % n;
      jc = ((n - j0) % n) * n + (n - j1) % n;
    } else {
      jc = (n - j) % n;
    }
    if (jc < j) continue;
    if (jc == j) {
      s.coeffs[j] = std::complex<double>(s.coeffs[j].real(), 0.0);
      continue;
    }
    const std::complex<double> avg = 0.5 * (s.coeffs[j] + std::conj(s.coeffs[jc]));
    s.coeffs[j] = avg;
    s.coeffs[jc] = std::conj(avg);
  }
}

bool clip_field(const ScalarField& u, double R, ScalarField& storage,
                const ScalarField*& view) {
  bool fired = false;
  for (double v : u.values)
    if (std::abs(v) > R) {
      fired = true;
      break;
    }
  if (!fired) {
    view = &u;
    return false;
  }
  storage = u;
  for (double& v : storage.values) v = std::clamp(v, -R, R);
  view = &storage;
  return true;
}

std::vector<ScalarField> spectral_gradient(const SpectralField& uhat) {
  const TorusGrid& g = uhat.grid;
  std::vector<ScalarField> out;
  out.reserve(g.dim);
  for (int axis = 0; axis < g.dim; ++axis) {
    SpectralField d = SpectralField::zeros(g);
    for (std::size_t j = 0; j < uhat.coeffs.size(); ++j) {
      const int slot = axis_slot(g, j, axis);
      if (slot == g.n / 2) continue;
      const double w = kTwoPi * wavenumber(slot, g.n);
      d.coeffs[j] = std::complex<double>(0.0, w) * uhat.coeffs[j];
    }
    out.push_back(inverse_transform(d));
  }
  return out;
}

// Spectral divergence of the (optionally dealiased) pointwise flux
// A_eps(u) grad u - B(u).
SpectralField drift_hat(const CoefficientSet& c, const HeatSemigroup& P,
                        const ScalarField& ucl, const std::vector<ScalarField>& grads,
                        bool dealias) {
  const TorusGrid& g = ucl.grid;
  const MatrixField A = regularized_diffusion(P, c, ucl);
  const std::size_t np = g.points();

  SpectralField acc = SpectralField::zeros(g);
  ScalarField flux = ScalarField::zeros(g);
  for (int i = 0; i < g.dim; ++i) {
    for (std::size_t p = 0; p < np; ++p) {
      double v = 0.0;
      for (int jx = 0; jx < g.dim; ++jx) v += A.entry(p, i, jx) * grads[jx].values[p];
      flux.values[p] = v - c.B(ucl.values[p])[static_cast<std::size_t>(i)];
    }
    SpectralField fhat = forward_transform(flux);
    if (dealias) dealias_23(fhat);
    for (std::size_t j = 0; j < fhat.coeffs.size(); ++j) {
      const int slot = axis_slot(g, j, i);
      if (slot == g.n / 2) continue;
      const double w = kTwoPi * wavenumber(slot, g.n);
      acc.coeffs[j] += std::complex<double>(0.0, w) * fhat.coeffs[j];
    }
  }
  return acc;
}

void check_path(const SolverConfig& cfg, const NoisePath& path, int steps) {
  if (path.K != cfg.K)
    throw std::invalid_argument("solver: path mode count differs from config K");
  if (std::abs(path.dt - cfg.dt) > 1e-12 * cfg.dt)
    throw std::invalid_argument("solver: path dt differs from config dt");
  if (path.steps < steps)
    throw std::invalid_argument("solver: path too short for the horizon");
}

}  // namespace

int SolverConfig::steps() const {
  if (!(dt > 0.0) || !(T > 0.0))
    throw std::invalid_argument("solver: dt and T must be positive");
  const long long m = std::llround(T / dt);
  if (m < 1 || m > 100000000ll)
    throw std::invalid_argument("solver: step count out of range");
  return static_cast<int>(m);
}

double stability_limit(const SolverConfig& cfg, const CoefficientSet& c) {
  const double theta = coeff_theta(cfg, c);
  const double margin = c.C_A - theta;
  if (margin <= 0.0) return std::numeric_limits<double>::infinity();
  const double h = cfg.grid.h();
  return 0.25 * h * h / margin;
}

void validate_config(const SolverConfig& cfg, const CoefficientSet& c) {
  TorusGrid::make(cfg.grid.dim, cfg.grid.n);
  if (cfg.grid.dim != c.dim)
    throw std::invalid_argument("solver: grid and coefficient dimensions differ");
  cfg.steps();
  if (cfg.K < 0) throw std::invalid_argument("solver: K must be nonnegative");
  if (!(cfg.clip_R > 0.0)) throw std::invalid_argument("solver: clip_R must be positive");
  if (cfg.snapshot_stride < 0)
    throw std::invalid_argument("solver: snapshot_stride must be nonnegative");
  if (!(cfg.eps >= 0.0)) throw std::invalid_argument("solver: eps must be nonnegative");
  const double theta = coeff_theta(cfg, c);
  if (!(theta > 0.0) || theta > c.delta + 1e-12 * c.delta)
    throw std::invalid_argument("solver: theta_split must lie in (0, delta]");
  const double limit = stability_limit(cfg, c);
  if (cfg.dt > limit * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "solver: dt = " << cfg.dt << " exceeds the stability bound " << limit
       << " (0.25 h^2 / (C_A - theta))";
    throw std::invalid_argument(os.str());
  }
}

ScalarField apply_drift(const CoefficientSet& c, const HeatSemigroup& P,
                        const ScalarField& u, bool dealias, double clip_R,
                        bool* clipped) {
  if (!(u.grid == P.grid()))
    throw std::invalid_argument("apply_drift: field and semigroup grids differ");
  ScalarField storage;
  const ScalarField* ucl = nullptr;
  const bool fired = clip_field(u, clip_R, storage, ucl);
  if (clipped) *clipped = fired;
  const std::vector<ScalarField> grads = gradient(u);
  return inverse_transform(drift_hat(c, P, *ucl, grads, dealias));
}

ScalarField step(const CoefficientSet& c, const HeatSemigroup& P,
                 const ScalarField& u_m, const NoisePath& path, int m,
                 const SolverConfig& cfg) {
  if (!(u_m.grid == cfg.grid) || !(P.grid() == cfg.grid))
    throw std::invalid_argument("step: grid mismatch");
  if (m < 0 || m >= path.steps) throw std::out_of_range("step: m outside the path");
  if (cfg.K > 0) check_path(cfg, path, m + 1);

  const SpectralField uhat = forward_transform(u_m);
  ScalarField storage;
  const ScalarField* ucl = nullptr;
  clip_field(u_m, cfg.clip_R, storage, ucl);
  const std::vector<ScalarField> grads = spectral_gradient(uhat);
  const SpectralField fhat = drift_hat(c, P, *ucl, grads, cfg.dealias);

  SpectralField nhat = SpectralField::zeros(cfg.grid);
  if (cfg.K > 0) {
    nhat = forward_transform(noise_increment(c, *ucl, path, m));
    if (cfg.dealias) dealias_23(nhat);
  }

  const double theta = coeff_theta(cfg, c);
  const std::vector<double> sym = gradient_symbol_sq(cfg.grid);
  SpectralField next = SpectralField::zeros(cfg.grid);
  for (std::size_t j = 0; j < next.coeffs.size(); ++j) {
    const double lam = cfg.dt * theta * sym[j];
    next.coeffs[j] =
        (uhat.coeffs[j] * (1.0 + lam) + cfg.dt * fhat.coeffs[j] + nhat.coeffs[j]) / (1.0 + lam);
  }
  return inverse_transform(next);
}

Trajectory integrate(const CoefficientSet& c, const SolverConfig& cfg,
                     const ScalarField& u0, std::shared_ptr<const NoisePath> path) {
  validate_config(cfg, c);
  if (!(u0.grid == cfg.grid)) throw std::invalid_argument("integrate: u0 grid mismatch");
  const int steps = cfg.steps();
  if (cfg.K > 0) {
    if (!path) throw std::invalid_argument("integrate: config has noise modes but no path");
    check_path(cfg, *path, steps);
  } else if (path) {
    throw std::invalid_argument("integrate: config disables noise but a path was supplied");
  }

  const TorusGrid& g = cfg.grid;
  const std::size_t np = g.points();
  const double cell = std::pow(g.h(), g.dim);
  const double dt = cfg.dt;
  const double theta = coeff_theta(cfg, c);
  const double C_E = 2.0 * (c.B_0 * c.B_0 + c.L_B * c.L_B) / c.delta;
  const std::vector<double> sym = gradient_symbol_sq(g);
  const HeatSemigroup P(g, cfg.eps);
  const NoiseBasis* basis = cfg.K > 0 ? &NoiseBasis::shared(g, cfg.K) : nullptr;

  const int stride =
      cfg.snapshot_stride > 0 ? cfg.snapshot_stride : std::max(1, steps / 128);

  Trajectory traj;
  traj.config = cfg;
  traj.path = path;
  traj.noise_checksum = path ? path->checksum() : 0;

  EnergyReport& rep = traj.energy;
  rep.h_norm_sq.reserve(steps + 1);
  rep.h1_integral.reserve(steps + 1);
  rep.ito_residual.reserve(steps + 1);
  rep.grad_sup.reserve(steps + 1);
  rep.trace_term.reserve(steps + 1);
  rep.l4_pow4.reserve(steps + 1);
  rep.drift_pairing.reserve(steps);
  rep.martingale.reserve(steps);
  rep.trace_step.reserve(steps);

  SpectralField uhat = forward_transform(u0);
  ScalarField u = u0;
  traj.times.push_back(0.0);
  traj.snapshots.push_back(u0);

  ScalarField noise = ScalarField::zeros(g);
  std::vector<double> row(static_cast<std::size_t>(std::max(cfg.K, 1)));
  ScalarField storage;

  double h2 = 0.0, gsq = 0.0;
  auto spectral_energy = [&](const SpectralField& s, double& out_h2, double& out_gsq) {
    double a = 0.0, b = 0.0;
    for (std::size_t j = 0; j < s.coeffs.size(); ++j) {
      const double m2 = std::norm(s.coeffs[j]);
      a += m2;
      b += sym[j] * m2;
    }
    out_h2 = a;
    out_gsq = b;
  };
  spectral_energy(uhat, h2, gsq);
  const double h2_0 = h2;

  double h1_running = 0.0, trace_running = 0.0, balance = 0.0;
  for (int m = 0; m <= steps; ++m) {
    rep.h_norm_sq.push_back(h2);
    rep.h1_integral.push_back(h1_running);
    rep.ito_residual.push_back(h2 - h2_0 - balance);
    rep.trace_term.push_back(trace_running);
    double l4 = 0.0;
    for (double v : u.values) l4 += v * v * v * v;
    rep.l4_pow4.push_back(cell * l4);
    if (m == steps) {
      const std::vector<ScalarField> grads = spectral_gradient(uhat);
      double gs = 0.0;
      for (std::size_t p = 0; p < np; ++p) {
        double q = 0.0;
        for (int ax = 0; ax < g.dim; ++ax) q += grads[ax].values[p] * grads[ax].values[p];
        gs = std::max(gs, q);
      }
      rep.grad_sup.push_back(std::sqrt(gs));
      break;
    }

    const ScalarField* ucl = nullptr;
    if (clip_field(u, cfg.clip_R, storage, ucl)) ++rep.clip_events;

    const std::vector<ScalarField> grads = spectral_gradient(uhat);
    double gs = 0.0;
    for (std::size_t p = 0; p < np; ++p) {
      double q = 0.0;
      for (int ax = 0; ax < g.dim; ++ax) q += grads[ax].values[p] * grads[ax].values[p];
      gs = std::max(gs, q);
    }
    rep.grad_sup.push_back(std::sqrt(gs));

    const SpectralField fhat = drift_hat(c, P, *ucl, grads, cfg.dealias);
    const double dp = 2.0 * dt * pairing(uhat, fhat);

    double mart = 0.0, tr = 0.0;
    SpectralField nhat = SpectralField::zeros(g);
    if (cfg.K > 0) {
      const double* db = &path->increments[static_cast<std::size_t>(m) * cfg.K];
      double tr_acc = 0.0;
      for (std::size_t p = 0; p < np; ++p) {
        c.eval_sigma_row(ucl->values[p], cfg.K, row.data());
        double acc = 0.0;
        for (int k = 0; k < cfg.K; ++k) {
          const double field = row[static_cast<std::size_t>(k)] *
                               basis->fields[static_cast<std::size_t>(k)].values[p];
          acc += field * db[k];
          tr_acc += field * field;
        }
        noise.values[p] = acc;
      }
      tr = dt * cell * tr_acc;
      nhat = forward_transform(noise);
      if (cfg.dealias) dealias_23(nhat);
      mart = 2.0 * pairing(uhat, nhat);
    }

    for (std::size_t j = 0; j < uhat.coeffs.size(); ++j) {
      const double lam = dt * theta * sym[j];
      uhat.coeffs[j] =
          (uhat.coeffs[j] * (1.0 + lam) + dt * fhat.coeffs[j] + nhat.coeffs[j]) / (1.0 + lam);
    }
    symmetrize(uhat);

    const double h2_prev = h2;
    const double gsq_prev = gsq;
    spectral_energy(uhat, h2, gsq);
    if (!std::isfinite(h2)) {
      std::ostringstream os;
      os << "integrate: non-finite state at step " << m + 1
         << " (stability bound violated?)";
      throw std::runtime_error(os.str());
    }
    u = inverse_transform(uhat);

    h1_running += dt * (h2_prev + gsq_prev);
    trace_running += tr;
    balance += dp + mart + tr;
    rep.drift_pairing.push_back(dp);
    rep.martingale.push_back(mart);
    rep.trace_step.push_back(tr);

    if (mart == 0.0 && tr == 0.0) {
      const double lhs = h2 + 2.0 * dt * c.delta * gsq;
      const double rhs = h2_prev + C_E * dt * (1.0 + h2_prev) + 1e-8 * (1.0 + h2_prev);
      if (lhs > rhs) {
        ++rep.energy_violations;
        rep.energy_max_excess = std::max(rep.energy_max_excess, lhs - rhs);
      }
    }

    if ((m + 1) % stride == 0 || m + 1 == steps) {
      traj.times.push_back((m + 1) * dt);
      traj.snapshots.push_back(u);
    }
  }

  traj.final_state = u;
  return traj;
}

Trajectory integrate(const CoefficientSet& c, const SolverConfig& cfg,
                     const ScalarField& u0, std::uint64_t seed) {
  if (cfg.K == 0) return integrate(c, cfg, u0, std::shared_ptr<const NoisePath>());
  auto path = std::make_shared<const NoisePath>(
      generate_path(seed, cfg.K, cfg.dt, cfg.steps()));
  return integrate(c, cfg, u0, std::move(path));
}

std::uint64_t trajectory_checksum(const Trajectory& traj) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix_double = [&h](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  for (double t : traj.times) mix_double(t);
  for (const ScalarField& s : traj.snapshots)
    for (double v : s.values) mix_double(v);
  for (double v : traj.final_state.values) mix_double(v);
  return h;
}

}  // namespace spde
