#include "spde/torus.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include "spde/rng.hpp"

namespace spde {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------------------
// FFTW backend. Plan creation is not thread-safe and is serialized behind a
// mutex; execution goes through the new-array interface, which is re-entrant.
// FFTW_ESTIMATE keeps planning deterministic, FFTW_UNALIGNED lets the plans
// accept whatever buffers callers hand in.

struct PlanKey {
  int dim;
  int n;
  int sign;
  auto operator<=>(const PlanKey&) const = default;
};

fftw_plan lookup_plan(const TorusGrid& g, int sign) {
  static std::mutex mu;
  static std::map<PlanKey, fftw_plan> cache;

  std::lock_guard<std::mutex> lock(mu);
  const PlanKey key{g.dim, g.n, sign};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  std::vector<std::complex<double>> in(g.points()), out(g.points());
  int dims[2] = {g.n, g.n};
  fftw_plan plan = fftw_plan_dft(g.dim, dims,
                                 reinterpret_cast<fftw_complex*>(in.data()),
                                 reinterpret_cast<fftw_complex*>(out.data()),
                                 sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!plan) throw std::runtime_error("torus: fftw plan creation failed");
  cache.emplace(key, plan);
  return plan;
}

void execute(const TorusGrid& g, int sign, std::complex<double>* in, std::complex<double>* out) {
  fftw_execute_dft(lookup_plan(g, sign),
                   reinterpret_cast<fftw_complex*>(in),
                   reinterpret_cast<fftw_complex*>(out));
}

// Flat slot index of the frequency mirror -k.
std::size_t conjugate_slot(const TorusGrid& g, std::size_t j) {
  const std::size_t n = static_cast<std::size_t>(g.n);
  if (g.dim == 1) return (n - j) % n;
  const std::size_t j0 = j / n, j1 = j % n;
  return ((n - j0) % n) * n + (n - j1) % n;
}

void check_hermitian(const SpectralField& c) {
  double scale = 0.0;
  for (const auto& z : c.coeffs) scale = std::max(scale, std::abs(z));
  const double tol = 1e-12 * (scale + 1e-300);
  for (std::size_t j = 0; j < c.coeffs.size(); ++j) {
    const std::size_t jc = conjugate_slot(c.grid, j);
    if (jc < j) continue;
    if (std::abs(c.coeffs[j] - std::conj(c.coeffs[jc])) > tol)
      throw std::runtime_error("torus: spectral data lost Hermitian symmetry");
  }
}

// Squared gradient multiplier |2 pi k|^2 with the unpaired n/2 slot excluded
// per axis, matching the gradient operator.
double grad_multiplier_sq(const TorusGrid& g, std::size_t j) {
  auto axis = [&](int slot) {
    const int k = wavenumber(slot, g.n);
    if (slot == g.n / 2) return 0.0;
    const double w = kTwoPi * k;
    return w * w;
  };
  if (g.dim == 1) return axis(static_cast<int>(j));
  const int n = g.n;
  return axis(static_cast<int>(j) / n) + axis(static_cast<int>(j) % n);
}

void check_finite(const ScalarField& f, const char* who) {
  for (double v : f.values)
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(who) + ": non-finite field value");
}

double torus_distance(const TorusGrid& g, std::size_t p, std::size_t q) {
  const double h = g.h();
  auto axis = [&](int a, int b) {
    double d = std::abs(a - b) * h;
    return std::min(d, 1.0 - d);
  };
  if (g.dim == 1) {
    const double d = axis(static_cast<int>(p), static_cast<int>(q));
    return d;
  }
  const int n = g.n;
  const double dx = axis(static_cast<int>(p) / n, static_cast<int>(q) / n);
  const double dy = axis(static_cast<int>(p) % n, static_cast<int>(q) % n);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

TorusGrid TorusGrid::make(int dim, int n) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("torus: dim must be 1 or 2");
  if (n < 8 || (n & (n - 1)) != 0)
    throw std::invalid_argument("torus: n must be a power of two, n >= 8");
  return TorusGrid{dim, n};
}

std::size_t TorusGrid::points() const {
  std::size_t p = static_cast<std::size_t>(n);
  return dim == 1 ? p : p * p;
}

ScalarField ScalarField::zeros(const TorusGrid& g) {
  return ScalarField{g, std::vector<double>(g.points(), 0.0)};
}

ScalarField ScalarField::constant(const TorusGrid& g, double c) {
  return ScalarField{g, std::vector<double>(g.points(), c)};
}

SpectralField SpectralField::zeros(const TorusGrid& g) {
  return SpectralField{g, std::vector<std::complex<double>>(g.points())};
}

MatrixField MatrixField::zeros(const TorusGrid& g) {
  return MatrixField{g, std::vector<double>(g.points() * g.dim * g.dim, 0.0)};
}

std::pair<double, double> MatrixField::eigenvalue_range() const {
  const std::size_t np = grid.points();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  if (grid.dim == 1) {
    for (std::size_t p = 0; p < np; ++p) {
      const double a = entry(p, 0, 0);
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
    return {lo, hi};
  }
  for (std::size_t p = 0; p < np; ++p) {
    const double a = entry(p, 0, 0), b = entry(p, 0, 1);
    const double c = entry(p, 1, 0), d = entry(p, 1, 1);
    const double scale = std::abs(a) + std::abs(b) + std::abs(c) + std::abs(d);
    if (std::abs(b - c) > 1e-10 * (scale + 1.0))
      throw std::invalid_argument("matrix field: eigenvalue range needs symmetric entries");
    const double mid = 0.5 * (a + d);
    const double r = std::hypot(0.5 * (a - d), 0.5 * (b + c));
    lo = std::min(lo, mid - r);
    hi = std::max(hi, mid + r);
  }
  return {lo, hi};
}

SpectralField forward_transform(const ScalarField& f) {
  check_finite(f, "forward_transform");
  const std::size_t np = f.grid.points();
  std::vector<std::complex<double>> buf(np);
  for (std::size_t i = 0; i < np; ++i) buf[i] = f.values[i];

  SpectralField out = SpectralField::zeros(f.grid);
  execute(f.grid, FFTW_FORWARD, buf.data(), out.coeffs.data());
  const double scale = 1.0 / static_cast<double>(np);
  for (auto& z : out.coeffs) z *= scale;
  check_hermitian(out);
  return out;
}

ScalarField inverse_transform(const SpectralField& c) {
  check_hermitian(c);
  const std::size_t np = c.grid.points();
  std::vector<std::complex<double>> in(c.coeffs.begin(), c.coeffs.end());
  std::vector<std::complex<double>> buf(np);
  execute(c.grid, FFTW_BACKWARD, in.data(), buf.data());

  ScalarField out = ScalarField::zeros(c.grid);
  double scale = 0.0, imag = 0.0;
  for (std::size_t i = 0; i < np; ++i) {
    out.values[i] = buf[i].real();
    scale = std::max(scale, std::abs(buf[i].real()));
    imag = std::max(imag, std::abs(buf[i].imag()));
  }
  if (imag > 1e-10 * (scale + 1.0))
    throw std::invalid_argument("inverse_transform: coefficients describe a complex field");
  return out;
}

std::vector<ScalarField> gradient(const ScalarField& f) {
  const TorusGrid& g = f.grid;
  const SpectralField c = forward_transform(f);
  std::vector<ScalarField> out;
  out.reserve(g.dim);
  for (int axis = 0; axis < g.dim; ++axis) {
    SpectralField d = SpectralField::zeros(g);
    for (std::size_t j = 0; j < c.coeffs.size(); ++j) {
      const int slot = g.dim == 1 ? static_cast<int>(j)
                                  : (axis == 0 ? static_cast<int>(j) / g.n : static_cast<int>(j) % g.n);
      if (slot == g.n / 2) continue;
      const double w = kTwoPi * wavenumber(slot, g.n);
      d.coeffs[j] = std::complex<double>(0.0, w) * c.coeffs[j];
    }
    out.push_back(inverse_transform(d));
  }
  return out;
}

ScalarField divergence(std::span<const ScalarField> flux) {
  if (flux.empty()) throw std::invalid_argument("divergence: empty flux");
  const TorusGrid& g = flux[0].grid;
  if (static_cast<int>(flux.size()) != g.dim)
    throw std::invalid_argument("divergence: component count must equal dim");

  SpectralField acc = SpectralField::zeros(g);
  for (int axis = 0; axis < g.dim; ++axis) {
    if (!(flux[axis].grid == g)) throw std::invalid_argument("divergence: grid mismatch");
    const SpectralField c = forward_transform(flux[axis]);
    for (std::size_t j = 0; j < c.coeffs.size(); ++j) {
      const int slot = g.dim == 1 ? static_cast<int>(j)
                                  : (axis == 0 ? static_cast<int>(j) / g.n : static_cast<int>(j) % g.n);
      if (slot == g.n / 2) continue;
      const double w = kTwoPi * wavenumber(slot, g.n);
      acc.coeffs[j] += std::complex<double>(0.0, w) * c.coeffs[j];
    }
  }
  return inverse_transform(acc);
}

void dealias_23(SpectralField& c) {
  const int n = c.grid.n;
  auto keep = [n](int slot) { return 3 * std::abs(wavenumber(slot, n)) < n; };
  if (c.grid.dim == 1) {
    for (int j = 0; j < n; ++j)
      if (!keep(j)) c.coeffs[static_cast<std::size_t>(j)] = 0.0;
    return;
  }
  for (int j0 = 0; j0 < n; ++j0)
    for (int j1 = 0; j1 < n; ++j1)
      if (!keep(j0) || !keep(j1))
        c.coeffs[static_cast<std::size_t>(j0) * n + j1] = 0.0;
}

double norm(const ScalarField& f, Norm which) {
  const double cell = std::pow(f.grid.h(), f.grid.dim);
  switch (which) {
    case Norm::L1: {
      double s = 0.0;
      for (double v : f.values) s += std::abs(v);
      return cell * s;
    }
    case Norm::L2: {
      double s = 0.0;
      for (double v : f.values) s += v * v;
      return std::sqrt(cell * s);
    }
    case Norm::L4: {
      double s = 0.0;
      for (double v : f.values) s += v * v * v * v;
      return std::pow(cell * s, 0.25);
    }
    case Norm::Linf: {
      double s = 0.0;
      for (double v : f.values) s = std::max(s, std::abs(v));
      return s;
    }
    case Norm::H1: {
      const SpectralField c = forward_transform(f);
      double s = 0.0;
      for (std::size_t j = 0; j < c.coeffs.size(); ++j)
        s += (1.0 + grad_multiplier_sq(f.grid, j)) * std::norm(c.coeffs[j]);
      return std::sqrt(s);
    }
    case Norm::GradLinf: {
      const std::vector<ScalarField> g = gradient(f);
      double s = 0.0;
      for (std::size_t i = 0; i < f.values.size(); ++i) {
        double q = 0.0;
        for (const auto& comp : g) q += comp.values[i] * comp.values[i];
        s = std::max(s, q);
      }
      return std::sqrt(s);
    }
  }
  throw std::logic_error("norm: unknown selector");
}

double fractional_norm(const ScalarField& f, double a) {
  const SpectralField c = forward_transform(f);
  double s = 0.0;
  for (std::size_t j = 0; j < c.coeffs.size(); ++j)
    s += std::pow(1.0 + grad_multiplier_sq(f.grid, j), a) * std::norm(c.coeffs[j]);
  return std::sqrt(s);
}

std::vector<double> gradient_symbol_sq(const TorusGrid& g) {
  std::vector<double> sym(g.points());
  for (std::size_t j = 0; j < sym.size(); ++j) sym[j] = grad_multiplier_sq(g, j);
  return sym;
}

namespace {

struct HolderAccumulator {
  double eta;
  double best = 0.0;

  void pair(double du, double dist) {
    if (dist <= 0.0) return;
    const double q = std::abs(du) / std::pow(dist, eta);
    best = std::max(best, q);
  }
};

void check_trajectory(std::span<const double> times, std::span<const ScalarField> snaps) {
  if (snaps.size() < 2)
    throw std::invalid_argument("holder_seminorm: needs at least two snapshots");
  if (times.size() != snaps.size())
    throw std::invalid_argument("holder_seminorm: times/snapshots length mismatch");
  for (std::size_t i = 0; i + 1 < times.size(); ++i)
    if (!(times[i] < times[i + 1]))
      throw std::invalid_argument("holder_seminorm: times must be strictly increasing");
  for (const auto& s : snaps)
    if (!(s.grid == snaps[0].grid))
      throw std::invalid_argument("holder_seminorm: snapshot grid mismatch");
}

void spatial_neighbour_pairs(const ScalarField& f, HolderAccumulator& acc) {
  const TorusGrid& g = f.grid;
  const double h = g.h();
  if (g.dim == 1) {
    for (int i = 0; i < g.n; ++i)
      acc.pair(f.at((i + 1) % g.n) - f.at(i), h);
    return;
  }
  for (int ix = 0; ix < g.n; ++ix)
    for (int iy = 0; iy < g.n; ++iy) {
      acc.pair(f.at((ix + 1) % g.n, iy) - f.at(ix, iy), h);
      acc.pair(f.at(ix, (iy + 1) % g.n) - f.at(ix, iy), h);
    }
}

}  // namespace

double holder_seminorm(std::span<const double> times,
                       std::span<const ScalarField> snapshots,
                       const HolderOptions& opt) {
  check_trajectory(times, snapshots);
  HolderAccumulator acc{opt.eta};

  for (const auto& s : snapshots) spatial_neighbour_pairs(s, acc);

  const std::size_t np = snapshots[0].grid.points();
  for (std::size_t i = 0; i + 1 < snapshots.size(); ++i) {
    const double dt = times[i + 1] - times[i];
    const double dist = std::sqrt(dt);
    for (std::size_t p = 0; p < np; ++p)
      acc.pair(snapshots[i + 1].values[p] - snapshots[i].values[p], dist);
  }

  const TorusGrid& g = snapshots[0].grid;
  const std::size_t ns = snapshots.size();
  for (int b = 0; b < opt.far_pair_budget; ++b) {
    const std::uint64_t ctr = static_cast<std::uint64_t>(b);
    const std::size_t i = static_cast<std::size_t>(rng::uniform01(opt.sample_seed, 1, ctr) * ns);
    const std::size_t j = static_cast<std::size_t>(rng::uniform01(opt.sample_seed, 2, ctr) * ns);
    const std::size_t p = static_cast<std::size_t>(rng::uniform01(opt.sample_seed, 3, ctr) * np);
    const std::size_t q = static_cast<std::size_t>(rng::uniform01(opt.sample_seed, 4, ctr) * np);
    if (i == j && p == q) continue;
    const double dt = std::abs(times[std::min(i, ns - 1)] - times[std::min(j, ns - 1)]);
    const double dist = std::max(std::sqrt(dt), torus_distance(g, p, q));
    acc.pair(snapshots[std::min(i, ns - 1)].values[p] - snapshots[std::min(j, ns - 1)].values[q], dist);
  }
  return acc.best;
}

double holder_seminorm_bruteforce(std::span<const double> times,
                                  std::span<const ScalarField> snapshots,
                                  double eta) {
  check_trajectory(times, snapshots);
  const TorusGrid& g = snapshots[0].grid;
  const std::size_t np = g.points();
  const std::size_t total = np * snapshots.size();
  if (total > 4096)
    throw std::invalid_argument("holder_seminorm_bruteforce: grid too large for all-pairs scan");

  HolderAccumulator acc{eta};
  for (std::size_t a = 0; a < total; ++a)
    for (std::size_t b = a + 1; b < total; ++b) {
      const std::size_t ia = a / np, pa = a % np;
      const std::size_t ib = b / np, pb = b % np;
      const double dt = std::abs(times[ia] - times[ib]);
      const double dist = std::max(std::sqrt(dt), torus_distance(g, pa, pb));
      acc.pair(snapshots[ia].values[pa] - snapshots[ib].values[pb], dist);
    }
  return acc.best;
}

double spatial_holder_norm(const ScalarField& f, double eta, int far_pair_budget,
                           std::uint64_t sample_seed) {
  HolderAccumulator acc{eta};
  spatial_neighbour_pairs(f, acc);
  const std::size_t np = f.grid.points();
  for (int b = 0; b < far_pair_budget; ++b) {
    const std::uint64_t ctr = static_cast<std::uint64_t>(b);
    const std::size_t p = static_cast<std::size_t>(rng::uniform01(sample_seed, 5, ctr) * np);
    const std::size_t q = static_cast<std::size_t>(rng::uniform01(sample_seed, 6, ctr) * np);
    if (p == q) continue;
    acc.pair(f.values[p] - f.values[q], torus_distance(f.grid, p, q));
  }
  double sup = 0.0;
  for (double v : f.values) sup = std::max(sup, std::abs(v));
  return sup + acc.best;
}

void save_field(const std::filesystem::path& file, const ScalarField& f) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("save_field: cannot open " + file.string());
  out << "torus v1 dim=" << f.grid.dim << " n=" << f.grid.n << "\n";
  char buf[64];
  for (double v : f.values) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", v);
    out << buf;
  }
  if (!out) throw std::runtime_error("save_field: write failed for " + file.string());
}

ScalarField load_field(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("load_field: cannot open " + file.string());
  std::string header;
  std::getline(in, header);
  int dim = 0, n = 0;
  if (std::sscanf(header.c_str(), "torus v1 dim=%d n=%d", &dim, &n) != 2)
    throw std::runtime_error("load_field: bad header '" + header + "'");
  ScalarField f = ScalarField::zeros(TorusGrid::make(dim, n));
  for (auto& v : f.values)
    if (!(in >> v)) throw std::runtime_error("load_field: truncated field data");
  double extra;
  if (in >> extra) throw std::runtime_error("load_field: trailing data");
  return f;
}

}  // namespace spde
