#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spde/coefficients.hpp"
#include "spde/torus.hpp"

namespace spde {

// Heat flow at time eps as the exact Fourier multiplier exp(-eps |2 pi k|^2).
// eps = 0 is the identity. Mass is preserved (the k = 0 multiplier is one)
// and every L^p norm contracts, so mollifying a matrix field entrywise keeps
// pointwise ellipticity bounds.
class HeatSemigroup {
 public:
  HeatSemigroup(const TorusGrid& g, double eps);

  double eps() const { return eps_; }
  const TorusGrid& grid() const { return grid_; }
  double multiplier(std::size_t slot) const { return mult_[slot]; }

  ScalarField apply(const ScalarField& f) const;
  void apply_inplace(SpectralField& c) const;  // multiplier only, no transforms

 private:
  TorusGrid grid_;
  double eps_;
  std::vector<double> mult_;
};

// Entrywise smoothing of a matrix field; equal entries stay equal, so
// symmetric input gives symmetric output.
MatrixField mollify_matrix(const HeatSemigroup& P, const MatrixField& M);

// A_eps(u): pointwise composition A(u(x)) mollified entrywise by P_eps.
MatrixField regularized_diffusion(const HeatSemigroup& P, const CoefficientSet& c,
                                  const ScalarField& u);

struct SemigroupConstants {
  std::vector<double> eps;
  std::vector<double> C_eps;   // sup ||P_eps f||_inf over unit-H probes
  double eta = 0.5;
  double alpha_eta = 0.0;      // log-log slope of ||(P_e1 - P_e2) h||_inf vs e1 - e2
  double r_squared = 0.0;
  bool reliable = false;       // r_squared >= 0.9
};

// Probes C_eps with random band-limited unit-H fields plus the extremal field
// whose coefficients match the multiplier, and fits alpha_eta on Weierstrass
// C^eta probes across log-spaced eps gaps.
SemigroupConstants estimate_semigroup_constants(const TorusGrid& g,
                                                std::span<const double> eps_grid,
                                                double eta = 0.5, int probes = 16,
                                                std::uint64_t seed = 0x5EED5EED5EED5EEDull);

}  // namespace spde
