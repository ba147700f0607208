#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spde/coefficients.hpp"
#include "spde/semigroup.hpp"
#include "spde/solver.hpp"
#include "spde/torus.hpp"

namespace spde {

// Energy-balance defect recombined from the solver's logs:
//   residual_m = ||u_m||^2 - ||u_0||^2
//             - sum_{j<m} (2 dt <u_j, F(u_j)> + 2 <u_j, sigma(u_j) dW_j> + trace_j).
// Rejects trajectories whose increment logs are missing or truncated.
std::vector<double> ito_energy_residual(const Trajectory& traj, const CoefficientSet& c);

struct MonotonicityReport {
  long long sampled_pairs = 0;
  double fitted_delta3 = 0.0;
  double fitted_C = 0.0;
  long long violations = 0;  // recount at the fitted constants
};

// Samples random band-limited pairs (u, v) at several amplitudes and bands,
// computes <F(u) - F(v), u - v> against the features (1, ||w||_H^2,
// ||w||_H^2 ||v||_H1^2, ||w||_H1^2), and sweeps delta3 in (0, delta] for the
// smallest admissible C. Requires samples >= 500.
MonotonicityReport monotonicity_probe(const CoefficientSet& c, const HeatSemigroup& P,
                                      int samples, const TorusGrid& grid,
                                      std::uint64_t seed = 0xA11C0157D3ull);

struct WeakResidualReport {
  int test_functions = 0;
  double max_residual = 0.0;
  double dt = 0.0;
  double h = 0.0;
  bool quadrature_degraded = false;  // snapshot stride above one
  std::vector<double> residuals;     // one per test function
};

// Tests the trajectory against low-order Fourier test functions:
//   <u(T), phi> - <u0, phi> - int <B(u), grad phi> + int <A_eps(u) grad u, grad phi>
//   - sum_m <sigma(u_m) dW_m, phi>,
// quadrature at the stored snapshots (left endpoints). tests >= 5.
WeakResidualReport weak_residual(const Trajectory& traj, const CoefficientSet& c, int tests);

// Column order of the uniform-in-eps monitor table.
std::array<const char*, 5> monitor_column_names();

struct MonitorTable {
  std::vector<double> eps;                     // group labels, input order
  std::vector<std::array<double, 5>> columns;  // Monte Carlo means per group
  std::array<double, 5> ratio{};               // max/min down each column
  double factor = 2.0;
  int per_group = 0;  // trajectories per eps
  bool pass = false;
};

// Means of sup ||u||_H^2, int ||u||_H1^2, sup ||u||_L4^4, sup ||grad u||_inf^2
// and the parabolic Hölder seminorm, grouped by eps. All groups must share
// u0, grid, dt and the same multiset of noise checksums (a coupled family).
MonitorTable uniform_monitor(std::span<const Trajectory> trajs, double factor = 2.0,
                             double eta = 0.5);

struct OperatorBoundReport {
  int samples = 0;
  double C_fit = 0.0;          // max ||F(u)||_{H^-1} / (1 + ||u||_H1)
  double truncation_gap = 0.0; // dual-mass fraction beyond the 2/3 band
};

OperatorBoundReport operator_bound_probe(const CoefficientSet& c, const HeatSemigroup& P,
                                         int samples,
                                         std::uint64_t seed = 0x0Bull * 0x9E3779B9ull);

struct TauReport {
  bool hit = false;
  double tau_time = 0.0;    // horizon when not hit
  int stop_snapshot = 0;    // last stored snapshot with time <= tau
  std::string trigger;      // "grad" or "holder"; empty when not hit
};

// Hitting-time scan: first step with ||grad u||_inf >= M, or first stored
// snapshot whose running Hölder seminorm reaches M.
TauReport tau_scan(const Trajectory& traj, double M, double eta = 0.5);

}  // namespace spde
