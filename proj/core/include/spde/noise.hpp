#pragma once

#include <cstdint>
#include <vector>

#include "spde/coefficients.hpp"
#include "spde/torus.hpp"

namespace spde {

// First K elements of the real Fourier basis on the torus: the constant mode,
// then sqrt(2) cos / sqrt(2) sin pairs ordered by |k|^2 and lexicographic
// representative (one representative per +-k pair).
struct NoiseBasis {
  TorusGrid grid;
  int K = 0;
  std::vector<ScalarField> fields;

  static NoiseBasis build(const TorusGrid& g, int K);
  // Process-wide cache; references stay valid for the program lifetime.
  static const NoiseBasis& shared(const TorusGrid& g, int K);
};

// Brownian increments dbeta_k(m) ~ N(0, dt) for k = 1..K (columns) and
// m = 0..steps-1 (rows). Entry (m, k) is drawn from a counter-based generator
// keyed by (seed, k, m), so any sub-rectangle -- fewer modes, fewer steps --
// reproduces bit-for-bit regardless of generation order.
struct NoisePath {
  std::uint64_t seed = 0;
  int K = 0;
  double dt = 0.0;
  int steps = 0;
  bool derived = false;  // true for coarsened paths
  std::vector<double> increments;  // steps x K, row-major

  double increment(int step, int k) const;  // k = 1..K
  std::uint64_t checksum() const;
};

NoisePath generate_path(std::uint64_t seed, int K, double dt, int steps);

// Couples a refinement pair: sums adjacent rows, doubling dt. steps must be
// even.
NoisePath coarsen(const NoisePath& fine);

// sum_{k<=K} sigma_k(u(x)) e_k(x) dbeta_k(step), evaluated pointwise.
ScalarField noise_increment(const CoefficientSet& c, const ScalarField& u,
                            const NoisePath& path, int step);

}  // namespace spde
