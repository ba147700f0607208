#include "spde/coefficients.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace spde {

namespace {

double param(const std::map<std::string, double>& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void reject_unknown_params(const std::map<std::string, double>& params,
                           const std::set<std::string>& known, const std::string& family) {
  for (const auto& [key, value] : params) {
    (void)value;
    if (!known.count(key))
      throw std::invalid_argument("coefficients: unknown parameter '" + key + "' for family " + family);
  }
}

// sigma_k(y) = s 2^-k sin(k y) / k. Row evaluation walks sin(k y) by angle
// addition instead of K libm calls.
void trig_sigma_row(double s, double y, int K, double* out) {
  const double c1 = std::cos(y), s1 = std::sin(y);
  double ck = c1, sk = s1;
  double w = 0.5 * s;
  for (int k = 1; k <= K; ++k) {
    out[k - 1] = w * sk / k;
    const double cn = ck * c1 - sk * s1;
    const double sn = sk * c1 + ck * s1;
    ck = cn;
    sk = sn;
    w *= 0.5;
  }
}

// van der Corput radical inverse, base 2. Prefix property: the first p points
// are a subset of the first q points for q >= p.
double van_der_corput(std::uint32_t i) {
  std::uint32_t v = i;
  v = (v >> 16) | (v << 16);
  v = ((v & 0x00ff00ffu) << 8) | ((v & 0xff00ff00u) >> 8);
  v = ((v & 0x0f0f0f0fu) << 4) | ((v & 0xf0f0f0f0u) >> 4);
  v = ((v & 0x33333333u) << 2) | ((v & 0xccccccccu) >> 2);
  v = ((v & 0x55555555u) << 1) | ((v & 0xaaaaaaaau) >> 1);
  return static_cast<double>(v) * 0x1.0p-32;
}

double spectral_norm_2x2(double a, double b, double c, double d) {
  // Largest singular value of [[a,b],[c,d]].
  const double q = a * a + b * b + c * c + d * d;
  const double det = a * d - b * c;
  const double disc = std::max(0.0, q * q - 4.0 * det * det);
  return std::sqrt(0.5 * (q + std::sqrt(disc)));
}

}  // namespace

void CoefficientSet::eval_sigma_row(double y, int K, double* out) const {
  if (sigma_row) {
    sigma_row(y, K, out);
    return;
  }
  for (int k = 1; k <= K; ++k) out[k - 1] = sigma(k, y);
}

CoefficientSet builtin_coefficients(const std::string& name,
                                    const std::map<std::string, double>& params, int dim) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("coefficients: dim must be 1 or 2");
  CoefficientSet c;
  c.name = name;
  c.dim = dim;

  auto diag = [dim](double v) {
    CoefficientSet::Mat m{};
    m[0] = v;
    if (dim == 2) m[3] = v;
    return m;
  };

  if (name == "trig") {
    reject_unknown_params(params, {"b", "a0", "a1", "s"}, name);
    const double b = param(params, "b", 0.3);
    const double a0 = param(params, "a0", 1.0);
    const double a1 = param(params, "a1", 0.5);
    const double s = param(params, "s", 0.1);
    if (!(a1 >= 0.0) || !(a1 < a0))
      throw std::invalid_argument("coefficients: trig needs 0 <= a1 < a0 (ellipticity window)");
    c.delta = a0 - a1;
    c.C_A = a0 + a1;
    c.L_A = a1;
    c.L_B = std::abs(b) * std::sqrt(static_cast<double>(dim));
    c.B_0 = 0.0;
    c.C_sigma = s * s / 3.0;
    c.B = [b, dim](double y) {
      CoefficientSet::Vec v{};
      v[0] = b * std::sin(y);
      if (dim == 2) v[1] = b * std::sin(y);
      return v;
    };
    c.A = [a0, a1, diag](double y) { return diag(a0 + a1 * std::sin(y)); };
    c.sigma = [s](int k, double y) { return s * std::pow(0.5, k) * std::sin(k * y) / k; };
    c.sigma_row = [s](double y, int K, double* out) { trig_sigma_row(s, y, K, out); };
    c.sigma_tail_sq = [s](int K) {
      // sum_{k>K} (s 2^-k / k)^2 <= s^2 4^-K / (3 (K+1)^2)
      return s * s * std::pow(0.25, K) / (3.0 * (K + 1.0) * (K + 1.0));
    };
    return c;
  }

  if (name == "rational") {
    reject_unknown_params(params, {"delta", "cA", "b", "s"}, name);
    const double delta = param(params, "delta", 0.5);
    const double cA = param(params, "cA", 1.5);
    const double b = param(params, "b", 0.0);
    const double s = param(params, "s", 0.0);
    if (!(delta > 0.0) || !(cA >= delta))
      throw std::invalid_argument("coefficients: rational needs 0 < delta <= cA");
    c.delta = delta;
    c.C_A = cA;
    // d/dy (cA-delta)/(1+y^2) peaks at y = 1/sqrt(3) with value 3 sqrt(3)/8.
    c.L_A = (cA - delta) * 3.0 * std::sqrt(3.0) / 8.0;
    c.L_B = std::abs(b) * std::sqrt(static_cast<double>(dim));
    c.B_0 = 0.0;
    c.C_sigma = s * s / 3.0;
    c.B = [b, dim](double y) {
      CoefficientSet::Vec v{};
      v[0] = b * std::sin(y);
      if (dim == 2) v[1] = b * std::sin(y);
      return v;
    };
    c.A = [delta, cA, diag](double y) { return diag(delta + (cA - delta) / (1.0 + y * y)); };
    c.sigma = [s](int k, double y) { return s * std::pow(0.5, k) * std::sin(k * y) / k; };
    c.sigma_row = [s](double y, int K, double* out) { trig_sigma_row(s, y, K, out); };
    c.sigma_tail_sq = [s](int K) {
      return s * s * std::pow(0.25, K) / (3.0 * (K + 1.0) * (K + 1.0));
    };
    return c;
  }

  if (name == "frozen") {
    reject_unknown_params(params, {"a", "b", "s"}, name);
    const double a = param(params, "a", 1.0);
    const double b = param(params, "b", 0.0);
    const double s = param(params, "s", 0.0);
    if (!(a > 0.0)) throw std::invalid_argument("coefficients: frozen needs a > 0");
    c.delta = a;
    c.C_A = a;
    c.L_A = 0.0;
    c.L_B = 0.0;
    c.B_0 = std::abs(b) * std::sqrt(static_cast<double>(dim));
    c.C_sigma = 0.0;
    c.B = [b, dim](double) {
      CoefficientSet::Vec v{};
      v[0] = b;
      if (dim == 2) v[1] = b;
      return v;
    };
    c.A = [a, diag](double) { return diag(a); };
    c.sigma = [s](int k, double) { return s * std::pow(0.5, k); };
    c.sigma_tail_sq = [s](int K) { return s * s * std::pow(0.25, K) / 3.0; };
    return c;
  }

  if (name == "linear_probe") {
    reject_unknown_params(params, {"s"}, name);
    const double s = param(params, "s", 0.1);
    c.delta = 1.0;
    c.C_A = 1.0;
    c.L_A = 0.0;
    c.L_B = 0.0;
    c.B_0 = 0.0;
    c.C_sigma = s * s / 3.0;
    c.B = [](double) { return CoefficientSet::Vec{}; };
    c.A = [diag](double) { return diag(1.0); };
    c.sigma = [s](int k, double y) { return s * std::pow(0.5, k) * std::sin(k * y) / k; };
    c.sigma_row = [s](double y, int K, double* out) { trig_sigma_row(s, y, K, out); };
    c.sigma_tail_sq = [s](int K) {
      return s * s * std::pow(0.25, K) / (3.0 * (K + 1.0) * (K + 1.0));
    };
    return c;
  }

  throw std::invalid_argument("coefficients: unknown family '" + name + "'");
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  os << (pass ? "pass" : "FAIL") << " probes=" << probe_points << " range=" << range
     << " eig=[" << measured_eig_min << "," << measured_eig_max << "]"
     << " lipA=" << measured_lipschitz_A << " lipB=" << measured_lipschitz_B
     << " sigma_sum=" << measured_sigma_lipschitz_sum << " sigma_tail=" << sigma_tail
     << " violations=" << violations.size();
  return os.str();
}

ValidationReport validate(const CoefficientSet& c, int probe_points, double R, int sigma_K) {
  if (probe_points < 100)
    throw std::invalid_argument("validate: probe_points must be at least 100");
  if (!(R > 0.0)) throw std::invalid_argument("validate: R must be positive");
  if (!c.A || !c.B || !c.sigma) throw std::invalid_argument("validate: incomplete coefficient set");

  ValidationReport rep;
  rep.probe_points = probe_points;
  rep.range = R;
  rep.measured_eig_min = std::numeric_limits<double>::infinity();
  rep.measured_eig_max = -rep.measured_eig_min;

  const double fd = 1e-5;               // central difference step
  const double rel = 1e-6, slack = 1e-9;  // tolerance for declared constants

  auto add = [&rep](const std::string& check, double y0, double y1, double lhs, double rhs) {
    if (rep.violations.size() < 32) rep.violations.push_back({check, y0, y1, lhs, rhs});
  };

  std::vector<double> sigma_sup_sq(static_cast<std::size_t>(sigma_K), 0.0);
  std::vector<double> row_lo(static_cast<std::size_t>(sigma_K));
  std::vector<double> row_hi(static_cast<std::size_t>(sigma_K));

  double prev_y = 0.0;
  CoefficientSet::Mat prev_A{};
  CoefficientSet::Vec prev_B{};

  for (int i = 0; i < probe_points; ++i) {
    const double y = -R + 2.0 * R * van_der_corput(static_cast<std::uint32_t>(i));

    // Ellipticity window and symmetry of A.
    const CoefficientSet::Mat m = c.A(y);
    double lo, hi;
    if (c.dim == 1) {
      lo = hi = m[0];
    } else {
      if (std::abs(m[1] - m[2]) > 1e-12 * (std::abs(m[1]) + std::abs(m[2]) + 1.0))
        add("A_symmetric", y, y, m[1], m[2]);
      const double mid = 0.5 * (m[0] + m[3]);
      const double r = std::hypot(0.5 * (m[0] - m[3]), 0.5 * (m[1] + m[2]));
      lo = mid - r;
      hi = mid + r;
    }
    rep.measured_eig_min = std::min(rep.measured_eig_min, lo);
    rep.measured_eig_max = std::max(rep.measured_eig_max, hi);
    if (lo < c.delta * (1.0 - rel) - slack) add("A_eig_lower", y, y, lo, c.delta);
    if (hi > c.C_A * (1.0 + rel) + slack) add("A_eig_upper", y, y, hi, c.C_A);

    // Lipschitz constants by secant between consecutive probes and by central
    // difference at the probe.
    const CoefficientSet::Vec bv = c.B(y);
    if (i > 0) {
      const double dy = std::abs(y - prev_y);
      if (dy > 1e-12) {
        const double dA = c.dim == 1 ? std::abs(m[0] - prev_A[0])
                                     : spectral_norm_2x2(m[0] - prev_A[0], m[1] - prev_A[1],
                                                         m[2] - prev_A[2], m[3] - prev_A[3]);
        rep.measured_lipschitz_A = std::max(rep.measured_lipschitz_A, dA / dy);
        if (dA > c.L_A * dy * (1.0 + rel) + slack) add("A_lipschitz", prev_y, y, dA / dy, c.L_A);
        const double dB = std::hypot(bv[0] - prev_B[0], c.dim == 2 ? bv[1] - prev_B[1] : 0.0);
        rep.measured_lipschitz_B = std::max(rep.measured_lipschitz_B, dB / dy);
        if (dB > c.L_B * dy * (1.0 + rel) + slack) add("B_lipschitz", prev_y, y, dB / dy, c.L_B);
      }
    }
    const CoefficientSet::Vec bp = c.B(y + fd);
    const CoefficientSet::Vec bm = c.B(y - fd);
    const double dB_fd =
        std::hypot(bp[0] - bm[0], c.dim == 2 ? bp[1] - bm[1] : 0.0) / (2.0 * fd);
    rep.measured_lipschitz_B = std::max(rep.measured_lipschitz_B, dB_fd);
    if (dB_fd > c.L_B * (1.0 + rel) + slack) add("B_derivative", y, y, dB_fd, c.L_B);

    // Linear growth of B against |B(0)| + L_B |y|.
    const double bnorm = std::hypot(bv[0], c.dim == 2 ? bv[1] : 0.0);
    if (bnorm > c.B_0 + c.L_B * std::abs(y) + slack)
      add("B_growth", y, y, bnorm, c.B_0 + c.L_B * std::abs(y));

    // sigma derivatives, central differences, row-wise.
    c.eval_sigma_row(y + fd, sigma_K, row_hi.data());
    c.eval_sigma_row(y - fd, sigma_K, row_lo.data());
    for (int k = 0; k < sigma_K; ++k) {
      const double d = (row_hi[k] - row_lo[k]) / (2.0 * fd);
      sigma_sup_sq[k] = std::max(sigma_sup_sq[k], d * d);
    }

    prev_y = y;
    prev_A = m;
    prev_B = bv;
  }

  double sum = 0.0;
  for (double v : sigma_sup_sq) sum += v;
  rep.measured_sigma_lipschitz_sum = sum;
  if (sum > c.C_sigma * (1.0 + rel) + slack)
    add("sigma_lipschitz_sum", 0.0, 0.0, sum, c.C_sigma);
  rep.sigma_tail = c.sigma_tail_sq ? c.sigma_tail_sq(sigma_K) : 0.0;
  if (!std::isfinite(rep.sigma_tail) || rep.sigma_tail < 0.0)
    add("sigma_tail", 0.0, 0.0, rep.sigma_tail, 0.0);

  if (!(c.delta > 0.0) || !(c.C_A >= c.delta)) add("ellipticity_window", 0.0, 0.0, c.delta, c.C_A);

  rep.pass = rep.violations.empty();
  return rep;
}

}  // namespace spde
