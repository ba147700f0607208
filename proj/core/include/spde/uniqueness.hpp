#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "spde/coefficients.hpp"
#include "spde/noise.hpp"
#include "spde/solver.hpp"
#include "spde/torus.hpp"

namespace spde {

// Breakpoint sequence a_m = exp(-m(m+1)/2), a_0 = 1; consecutive breakpoints
// satisfy int_{a_m}^{a_{m-1}} du/u = m.
double breakpoint_a(int m);

// Smooth convex surrogate of |x|: phi_n'' = psi_n with
// psi_n(u) = (1/n)(1/u) on (a_n, a_{n-1}) and zero elsewhere, so phi_n
// vanishes on [-a_n, a_n] and runs parallel to |x| outside [-a_{n-1}, a_{n-1}].
// phi_n' and phi_n are tabulated on a log-spaced grid and interpolated
// piecewise linearly; evaluation is even/odd symmetric.
struct PhiN {
  int n = 1;
  double a_lo = 0.0;         // a_n
  double a_hi = 0.0;         // a_{n-1}
  double c_shift = 0.0;      // phi(x) = |x| - c_shift for |x| >= a_hi
  double psi_integral = 0.0; // quadrature of psi over (a_lo, a_hi)
  std::vector<double> knots;
  std::vector<double> dphi;
  std::vector<double> phi_tab;

  double psi(double u) const;
  double phi_prime(double x) const;
  double phi(double x) const;
  double phi_second(double x) const;  // psi(|x|)

  static PhiN build(int n);
};

// Phi_n(f) = grid quadrature of phi_n(f(x)); squeezed between
// ||f||_L1 - a_{n-1} and ||f||_L1.
double big_phi(const PhiN& p, const ScalarField& f);

// Two integrations under one noise path, tracking Phi_n of the difference.
struct UniquenessRun {
  std::vector<double> times;
  std::vector<std::vector<double>> big_phi_series;  // [n_list index][time]
  double max_h_gap = 0.0;
  bool bit_identical = false;
  std::uint64_t checksum_a = 0;
  std::uint64_t checksum_b = 0;
};

UniquenessRun uniqueness_experiment(const CoefficientSet& c, const SolverConfig& cfg,
                                    const ScalarField& u0_a, const ScalarField& u0_b,
                                    std::shared_ptr<const NoisePath> path,
                                    std::span<const int> n_list);

// Monte Carlo aggregation over seeds plus the bound-shape fit: the smallest C
// with mean Phi_n(T) <= C/n + e^{lambda T} * L1-gap for every n, lambda swept
// over [0, 8]. feasible reports C <= cap at the best lambda.
struct UniquenessReport {
  std::vector<int> n_list;
  std::vector<double> times;
  std::vector<std::vector<double>> mean_big_phi;    // [n][time]
  std::vector<std::vector<double>> stderr_big_phi;  // [n][time]
  double l1_gap_u0 = 0.0;
  int seeds = 0;
  double fitted_C = 0.0;
  double fitted_lambda = 0.0;
  bool feasible = false;
};

UniquenessReport uniqueness_study(const CoefficientSet& c, const SolverConfig& cfg,
                                  const ScalarField& u0_a, const ScalarField& u0_b,
                                  std::span<const std::uint64_t> seeds,
                                  std::span<const int> n_list,
                                  double feasibility_cap = 1.0);

}  // namespace spde
