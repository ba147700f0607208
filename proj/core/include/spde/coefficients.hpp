#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace spde {

// Coefficient triple (B, A, sigma) with the declared constants the estimates
// lean on: the ellipticity window [delta, C_A] of A, Lipschitz constants, and
// the summed Lipschitz bound C_sigma = sum_k sup|sigma_k'|^2 of the noise
// family. A is dim x dim symmetric, stored row-major in a fixed 2x2 slab; B
// has dim components. sigma is indexed k = 1, 2, ...
struct CoefficientSet {
  using Vec = std::array<double, 2>;
  using Mat = std::array<double, 4>;

  std::string name;
  int dim = 1;

  double delta = 1.0;   // inf of A's eigenvalues
  double C_A = 1.0;     // sup of A's eigenvalues
  double L_A = 0.0;     // |A(y1)-A(y2)| <= L_A |y1-y2| (spectral norm)
  double L_B = 0.0;     // |B(y1)-B(y2)| <= L_B |y1-y2|
  double B_0 = 0.0;     // |B(0)|
  double C_sigma = 0.0; // sum_k sup|sigma_k'|^2

  std::function<Vec(double)> B;
  std::function<Mat(double)> A;
  std::function<double(int, double)> sigma;          // sigma_k(y), k >= 1
  std::function<double(int)> sigma_tail_sq;          // bound on sum_{k>K} sup_y sigma_k(y)^2

  // Optional fast row evaluation sigma_1..sigma_K at one y; the default loops
  // over sigma(k, y).
  std::function<void(double, int, double*)> sigma_row;

  void eval_sigma_row(double y, int K, double* out) const;
};

// Families:
//   trig         B_i(y) = b sin y, A = (a0 + a1 sin y) I, sigma_k = s 2^-k sin(k y)/k
//   rational     A = delta I + (cA - delta)/(1 + y^2) I, B and sigma as trig
//   frozen       constants: A = a I, B_i = b, sigma_k = s 2^-k
//   linear_probe B = 0, A = I, sigma as trig
// Unknown names and empty ellipticity windows (a1 >= a0, cA < delta) are
// rejected. Unknown parameter keys are rejected.
CoefficientSet builtin_coefficients(const std::string& name,
                                    const std::map<std::string, double>& params = {},
                                    int dim = 1);

struct ValidationWitness {
  std::string check;
  double y0 = 0.0;
  double y1 = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct ValidationReport {
  bool pass = false;
  int probe_points = 0;
  double range = 0.0;
  std::vector<ValidationWitness> violations;
  double measured_eig_min = 0.0;
  double measured_eig_max = 0.0;
  double measured_lipschitz_A = 0.0;
  double measured_lipschitz_B = 0.0;
  double measured_sigma_lipschitz_sum = 0.0;  // finite-difference estimate of C_sigma
  double sigma_tail = 0.0;                    // declared tail beyond sigma_K
  std::string summary() const;
};

// Samples y along the first probe_points entries of a fixed van der Corput
// sequence on [-R, R] (nested, so a rejection at density p persists at any
// density >= p) and checks the declared constants by finite differences.
ValidationReport validate(const CoefficientSet& c, int probe_points,
                          double R = 50.0, int sigma_K = 32);

}  // namespace spde
