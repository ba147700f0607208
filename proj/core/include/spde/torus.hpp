#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace spde {

// Uniform periodic grid on [0,1]^dim. n is a power of two, so h = 1/n is an
// exact binary fraction and h * n == 1 holds identically.
struct TorusGrid {
  int dim = 1;
  int n = 8;

  // Validates dim in {1,2}, n a power of two >= 8.
  static TorusGrid make(int dim, int n);

  double h() const { return 1.0 / n; }
  std::size_t points() const;

  bool operator==(const TorusGrid&) const = default;
};

// Real scalar field sampled at grid nodes, row-major.
struct ScalarField {
  TorusGrid grid;
  std::vector<double> values;

  static ScalarField zeros(const TorusGrid& g);
  static ScalarField constant(const TorusGrid& g, double c);

  double& at(int ix) { return values[static_cast<std::size_t>(ix)]; }
  double at(int ix) const { return values[static_cast<std::size_t>(ix)]; }
  double& at(int ix, int iy) { return values[static_cast<std::size_t>(ix) * grid.n + iy]; }
  double at(int ix, int iy) const { return values[static_cast<std::size_t>(ix) * grid.n + iy]; }
};

// Fourier coefficients on the full wavevector band {-n/2, ..., n/2-1}^dim,
// stored in FFT slot order (slot j holds wavenumber j < n/2 ? j : j - n).
// Coefficients of a real field obey coeff(-k) == conj(coeff(k)).
struct SpectralField {
  TorusGrid grid;
  std::vector<std::complex<double>> coeffs;

  static SpectralField zeros(const TorusGrid& g);
};

// dim x dim symmetric matrix attached to every grid node.
struct MatrixField {
  TorusGrid grid;
  std::vector<double> entries;  // points * dim * dim, row-major per node

  static MatrixField zeros(const TorusGrid& g);

  double entry(std::size_t p, int r, int c) const {
    return entries[(p * grid.dim + r) * grid.dim + c];
  }
  double& entry(std::size_t p, int r, int c) {
    return entries[(p * grid.dim + r) * grid.dim + c];
  }

  // Closed-form symmetric eigenvalue extremes over all nodes.
  std::pair<double, double> eigenvalue_range() const;
};

// Wavenumber held by FFT slot j on an n-point axis.
inline int wavenumber(int j, int n) { return j < n / 2 ? j : j - n; }

SpectralField forward_transform(const ScalarField& f);
ScalarField inverse_transform(const SpectralField& c);

// Spectral derivative, multiplier 2*pi*i*k per axis. The n/2 slot has no
// conjugate partner, so its derivative is set to zero to keep fields real.
std::vector<ScalarField> gradient(const ScalarField& f);
ScalarField divergence(std::span<const ScalarField> flux);

// 2/3 rule: zeroes every mode with 3*|k_axis| >= n on any axis.
void dealias_23(SpectralField& c);

enum class Norm { L1, L2, L4, Linf, H1, GradLinf };
double norm(const ScalarField& f, Norm which);

// (1 + |2 pi k|^2)^{a/2} multiplier norm; agrees with L2 at a = 0 and with H1
// at a = 1. Provided for exploratory use beyond those anchors.
double fractional_norm(const ScalarField& f, double a);

// Per-slot squared multiplier |2 pi k|^2 of the gradient (n/2 slots zeroed
// per axis); the symbol behind the H1-type norms above.
std::vector<double> gradient_symbol_sq(const TorusGrid& g);

struct HolderOptions {
  double eta = 0.5;
  int far_pair_budget = 10000;
  std::uint64_t sample_seed = 0x9E3779B97F4A7C15ull;
};

// Parabolic Hölder quotient sup |u(t,x)-u(s,y)| / d((t,x),(s,y))^eta with
// d = max(|t-s|^{1/2}, |x-y|_torus), sampled over nearest spatial neighbours
// at equal times, consecutive times at equal positions, and a fixed budget of
// seeded random far pairs. Requires at least two snapshots.
double holder_seminorm(std::span<const double> times,
                       std::span<const ScalarField> snapshots,
                       const HolderOptions& opt = {});

// All-pairs reference for small grids (total sample count is capped).
double holder_seminorm_bruteforce(std::span<const double> times,
                                  std::span<const ScalarField> snapshots,
                                  double eta);

// sup|f| plus the spatial Hölder quotient of a single snapshot.
double spatial_holder_norm(const ScalarField& f, double eta,
                           int far_pair_budget = 2048,
                           std::uint64_t sample_seed = 0x51A7B2C93D5E6F01ull);

// Text snapshot format: header "torus v1 dim=<d> n=<n>", then one value per
// line in row-major order, printed so a read-back reproduces every bit.
void save_field(const std::filesystem::path& file, const ScalarField& f);
ScalarField load_field(const std::filesystem::path& file);

}  // namespace spde
