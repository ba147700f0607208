#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "spde/coefficients.hpp"
#include "spde/noise.hpp"
#include "spde/semigroup.hpp"
#include "spde/torus.hpp"

namespace spde {

// One integration run: semi-implicit IMEX Euler-Maruyama with the diffusion
// split at level theta_split. The implicit piece (I - dt theta Laplacian) is
// diagonal in spectral space; the explicit remainder obeys the parabolic
// stability bound checked by validate_config.
struct SolverConfig {
  TorusGrid grid;
  double eps = 0.0;
  double dt = 0.0;
  double T = 0.0;
  int K = 0;                 // noise modes; 0 disables the noise term
  bool dealias = true;
  double theta_split = 0.0;  // 0 selects the coefficient set's delta
  double clip_R = 50.0;      // coefficient evaluations clamp |u| here, flagged
  int snapshot_stride = 0;   // 0 picks a stride giving about 128 snapshots

  int steps() const;
};

// 0.25 h^2 / (C_A - theta), infinite when C_A <= theta.
double stability_limit(const SolverConfig& cfg, const CoefficientSet& c);

// Throws std::invalid_argument on bad ranges, theta outside (0, delta], or a
// dt above the stability limit.
void validate_config(const SolverConfig& cfg, const CoefficientSet& c);

// Per-step energy bookkeeping. Series indexed by time level run over
// m = 0..steps; increment logs run over m = 0..steps-1.
struct EnergyReport {
  std::vector<double> h_norm_sq;     // ||u_m||_H^2
  std::vector<double> h1_integral;   // running sum dt ||u_j||_{H1}^2, j < m
  std::vector<double> ito_residual;  // energy balance defect up to level m
  std::vector<double> grad_sup;      // ||grad u_m||_Linf
  std::vector<double> trace_term;    // running sum of trace_step
  std::vector<double> l4_pow4;       // ||u_m||_{L4}^4

  std::vector<double> drift_pairing;  // 2 dt <u_m, F_eps(u_m)>_H
  std::vector<double> martingale;     // 2 <u_m, sigma(u_m) dW_m>_H
  std::vector<double> trace_step;     // dt sum_k ||sigma_k(u_m) e_k||_H^2

  long long clip_events = 0;         // steps where |u| exceeded clip_R
  long long energy_violations = 0;   // discrete energy inequality (sigma = 0)
  double energy_max_excess = 0.0;
};

struct Trajectory {
  SolverConfig config;
  std::vector<double> times;           // stored snapshot times, times[0] = 0
  std::vector<ScalarField> snapshots;  // snapshots[0] = u0; final always kept
  ScalarField final_state;
  EnergyReport energy;
  std::uint64_t noise_checksum = 0;
  std::shared_ptr<const NoisePath> path;  // null when K = 0
};

// F_eps(u) = div(A_eps(u) grad u - B(u)) with spectral differentiation and
// 2/3-rule dealiasing of the pointwise flux. Coefficients see u clamped to
// [-clip_R, clip_R]; *clipped reports whether the clamp fired.
ScalarField apply_drift(const CoefficientSet& c, const HeatSemigroup& P,
                        const ScalarField& u, bool dealias = true,
                        double clip_R = 50.0, bool* clipped = nullptr);

// One IMEX step m -> m+1 under the given path.
ScalarField step(const CoefficientSet& c, const HeatSemigroup& P,
                 const ScalarField& u_m, const NoisePath& path, int m,
                 const SolverConfig& cfg);

// Full integration against a supplied path (dt and K must match, steps must
// cover T). The result is a deterministic function of (u0, path, cfg).
Trajectory integrate(const CoefficientSet& c, const SolverConfig& cfg,
                     const ScalarField& u0, std::shared_ptr<const NoisePath> path);

// Convenience: generates the path from the seed (K > 0), or integrates the
// deterministic dynamics (K = 0, seed unused).
Trajectory integrate(const CoefficientSet& c, const SolverConfig& cfg,
                     const ScalarField& u0, std::uint64_t seed);

// FNV-1a over times, snapshot values and the final state; equal checksums on
// repeated runs witness bit-level determinism.
std::uint64_t trajectory_checksum(const Trajectory& traj);

}  // namespace spde
