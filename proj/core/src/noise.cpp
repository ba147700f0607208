#include "spde/noise.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "spde/rng.hpp"

namespace spde {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Mode {
  int k0 = 0;
  int k1 = 0;
  bool sine = false;  // false: sqrt(2) cos, true: sqrt(2) sin; k = 0 is the constant
};

// Wavevector representatives ordered by |k|^2 then lexicographically, each
// contributing a cosine and a sine field. The n/2 mode is excluded: its sine
// samples to zero on the grid and its cosine needs a different normalization,
// so neither belongs to an orthonormal family the grid resolves.
std::vector<Mode> mode_table(const TorusGrid& g, int K) {
  std::vector<std::pair<int, std::pair<int, int>>> reps;
  const int span = g.n / 2 - 1;
  if (g.dim == 1) {
    for (int k = 1; k <= span; ++k) reps.push_back({k * k, {k, 0}});
  } else {
    for (int k0 = -span; k0 <= span; ++k0)
      for (int k1 = -span; k1 <= span; ++k1) {
        const bool positive = k0 > 0 || (k0 == 0 && k1 > 0);
        if (!positive) continue;
        reps.push_back({k0 * k0 + k1 * k1, {k0, k1}});
      }
  }
  std::sort(reps.begin(), reps.end());

  std::vector<Mode> modes;
  modes.push_back({0, 0, false});  // constant
  for (const auto& [w, kv] : reps) {
    (void)w;
    if (static_cast<int>(modes.size()) >= K) break;
    modes.push_back({kv.first, kv.second, false});
    if (static_cast<int>(modes.size()) >= K) break;
    modes.push_back({kv.first, kv.second, true});
  }
  if (static_cast<int>(modes.size()) < K)
    throw std::invalid_argument("noise basis: K exceeds the modes the grid resolves");
  return modes;
}

}  // namespace

NoiseBasis NoiseBasis::build(const TorusGrid& g, int K) {
  if (K < 1) throw std::invalid_argument("noise basis: K must be positive");
  NoiseBasis basis{g, K, {}};
  const auto modes = mode_table(g, K);
  const double root2 = std::sqrt(2.0);
  for (const Mode& m : modes) {
    ScalarField f = ScalarField::zeros(g);
    if (m.k0 == 0 && m.k1 == 0 && !m.sine) {
      for (double& v : f.values) v = 1.0;
    } else {
      for (std::size_t p = 0; p < f.values.size(); ++p) {
        const int ix = g.dim == 1 ? static_cast<int>(p) : static_cast<int>(p) / g.n;
        const int iy = g.dim == 1 ? 0 : static_cast<int>(p) % g.n;
        const double phase = kTwoPi * (m.k0 * ix + m.k1 * iy) * g.h();
        f.values[p] = root2 * (m.sine ? std::sin(phase) : std::cos(phase));
      }
    }
    basis.fields.push_back(std::move(f));
  }
  return basis;
}

const NoiseBasis& NoiseBasis::shared(const TorusGrid& g, int K) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int>, std::unique_ptr<NoiseBasis>> cache;
  std::lock_guard<std::mutex> lock(mu);
  const auto key = std::make_tuple(g.dim, g.n, K);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, std::make_unique<NoiseBasis>(build(g, K))).first;
  return *it->second;
}

double NoisePath::increment(int step, int k) const {
  if (step < 0 || step >= steps || k < 1 || k > K)
    throw std::out_of_range("noise path: increment index out of range");
  return increments[static_cast<std::size_t>(step) * K + (k - 1)];
}

std::uint64_t NoisePath::checksum() const {
  // FNV-1a over the header and the raw increment bits.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  mix(seed);
  mix(static_cast<std::uint64_t>(K));
  std::uint64_t dt_bits;
  static_assert(sizeof(dt_bits) == sizeof(dt));
  std::memcpy(&dt_bits, &dt, sizeof(dt_bits));
  mix(dt_bits);
  mix(static_cast<std::uint64_t>(steps));
  for (double v : increments) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    mix(bits);
  }
  return h;
}

NoisePath generate_path(std::uint64_t seed, int K, double dt, int steps) {
  if (K < 1) throw std::invalid_argument("generate_path: K must be positive");
  if (steps < 1) throw std::invalid_argument("generate_path: steps must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("generate_path: dt must be positive");
  const std::size_t cells = static_cast<std::size_t>(K) * static_cast<std::size_t>(steps);
  constexpr std::size_t kMaxCells = std::size_t{1} << 28;
  if (cells > kMaxCells) {
    std::ostringstream os;
    os << "generate_path: increment store of " << steps << " x " << K << " cells needs "
       << (cells * sizeof(double)) / (1024 * 1024) << " MiB, above the "
       << (kMaxCells * sizeof(double)) / (1024 * 1024) << " MiB cap";
    throw std::invalid_argument(os.str());
  }

  NoisePath path{seed, K, dt, steps, false, {}};
  path.increments.resize(cells);
  const double scale = std::sqrt(dt);
  for (int m = 0; m < steps; ++m)
    for (int k = 1; k <= K; ++k)
      path.increments[static_cast<std::size_t>(m) * K + (k - 1)] =
          scale * rng::gaussian(seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(m));
  return path;
}

NoisePath coarsen(const NoisePath& fine) {
  if (fine.steps % 2 != 0)
    throw std::invalid_argument("coarsen: step count must be even");
  NoisePath coarse{fine.seed, fine.K, 2.0 * fine.dt, fine.steps / 2, true, {}};
  coarse.increments.resize(static_cast<std::size_t>(coarse.steps) * coarse.K);
  for (int m = 0; m < coarse.steps; ++m)
    for (int k = 0; k < coarse.K; ++k)
      coarse.increments[static_cast<std::size_t>(m) * coarse.K + k] =
          fine.increments[static_cast<std::size_t>(2 * m) * fine.K + k] +
          fine.increments[static_cast<std::size_t>(2 * m + 1) * fine.K + k];
  return coarse;
}

ScalarField noise_increment(const CoefficientSet& c, const ScalarField& u,
                            const NoisePath& path, int step) {
  if (step < 0 || step >= path.steps)
    throw std::out_of_range("noise_increment: step out of range");
  const NoiseBasis& basis = NoiseBasis::shared(u.grid, path.K);

  ScalarField out = ScalarField::zeros(u.grid);
  const std::size_t np = u.grid.points();
  std::vector<double> row(static_cast<std::size_t>(path.K));
  const double* db = &path.increments[static_cast<std::size_t>(step) * path.K];
  for (std::size_t p = 0; p < np; ++p) {
    c.eval_sigma_row(u.values[p], path.K, row.data());
    double acc = 0.0;
    for (int k = 0; k < path.K; ++k)
      acc += row[static_cast<std::size_t>(k)] * basis.fields[static_cast<std::size_t>(k)].values[p] * db[k];
    out.values[p] = acc;
  }
  return out;
}

}  // namespace spde
