#include <cmath>
#include <cstdint>

#include <doctest.h>

#include "spde/coefficients.hpp"
#include "spde/noise.hpp"
#include "spde/rng.hpp"
#include "spde/torus.hpp"

using namespace spde;

namespace {

double inner(const ScalarField& a, const ScalarField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
  return s * std::pow(a.grid.h(), a.grid.dim);
}

}  // namespace

TEST_CASE("basis fields are orthonormal") {
  for (int dim : {1, 2}) {
    const TorusGrid g = TorusGrid::make(dim, dim == 1 ? 16 : 8);
    const int K = dim == 1 ? 15 : 9;
    const NoiseBasis basis = NoiseBasis::build(g, K);
    REQUIRE(static_cast<int>(basis.fields.size()) == K);
    for (int i = 0; i < K; ++i)
      for (int j = i; j < K; ++j) {
        const double ip = inner(basis.fields[i], basis.fields[j]);
        CHECK(ip == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12).scale(1.0));
      }
  }
}

TEST_CASE("first basis field is the constant") {
  const TorusGrid g = TorusGrid::make(1, 16);
  const NoiseBasis basis = NoiseBasis::build(g, 3);
  for (double v : basis.fields[0].values) CHECK(v == 1.0);
}

TEST_CASE("basis size is limited by the grid") {
  const TorusGrid g = TorusGrid::make(1, 8);
  CHECK(NoiseBasis::build(g, 7).fields.size() == 7);  // constant + 3 cos/sin pairs
  CHECK_THROWS(NoiseBasis::build(g, 8));
  CHECK_THROWS(NoiseBasis::build(g, 0));
}

TEST_CASE("shared basis cache returns stable references") {
  const TorusGrid g = TorusGrid::make(1, 16);
  const NoiseBasis& a = NoiseBasis::shared(g, 4);
  const NoiseBasis& b = NoiseBasis::shared(g, 4);
  CHECK(&a == &b);
  CHECK(a.K == 4);
}

TEST_CASE("path increments are sqrt dt scaled keyed gaussians") {
  const double dt = 0.02;
  const NoisePath path = generate_path(99, 6, dt, 40);
  CHECK(path.steps == 40);
  CHECK(path.K == 6);
  CHECK(!path.derived);
  for (int m = 0; m < 40; m += 7)
    for (int k = 1; k <= 6; ++k)
      CHECK(path.increment(m, k) == std::sqrt(dt) * rng::gaussian(99, k, m));
}

TEST_CASE("sub rectangles of a path reproduce bit for bit") {
  const NoisePath big = generate_path(7, 8, 0.01, 50);
  const NoisePath small = generate_path(7, 3, 0.01, 20);
  for (int m = 0; m < 20; ++m)
    for (int k = 1; k <= 3; ++k) CHECK(small.increment(m, k) == big.increment(m, k));
}

TEST_CASE("path argument validation and memory cap") {
  CHECK_THROWS(generate_path(1, 0, 0.01, 10));
  CHECK_THROWS(generate_path(1, 4, 0.0, 10));
  CHECK_THROWS(generate_path(1, 4, 0.01, 0));
  CHECK_THROWS_WITH_AS(generate_path(1, 100000, 0.01, 100000),
                       doctest::Contains("MiB"), std::invalid_argument);
}

TEST_CASE("increment indexing is bounds checked") {
  const NoisePath path = generate_path(3, 2, 0.1, 5);
  CHECK_THROWS(path.increment(-1, 1));
  CHECK_THROWS(path.increment(5, 1));
  CHECK_THROWS(path.increment(0, 0));
  CHECK_THROWS(path.increment(0, 3));
}

TEST_CASE("checksums witness determinism") {
  const NoisePath a = generate_path(11, 4, 0.01, 30);
  const NoisePath b = generate_path(11, 4, 0.01, 30);
  const NoisePath c = generate_path(12, 4, 0.01, 30);
  CHECK(a.checksum() == b.checksum());
  CHECK(a.checksum() != c.checksum());
}

TEST_CASE("coarsening sums adjacent increments and doubles dt") {
  const NoisePath fine = generate_path(5, 3, 0.005, 12);
  const NoisePath coarse = coarsen(fine);
  CHECK(coarse.steps == 6);
  CHECK(coarse.dt == 0.01);
  CHECK(coarse.K == 3);
  CHECK(coarse.derived);
  for (int m = 0; m < 6; ++m)
    for (int k = 1; k <= 3; ++k)
      CHECK(coarse.increment(m, k) ==
            fine.increment(2 * m, k) + fine.increment(2 * m + 1, k));

  const NoisePath odd = generate_path(5, 3, 0.005, 11);
  CHECK_THROWS(coarsen(odd));
}

TEST_CASE("increment sample variance approaches dt") {
  const double dt = 0.25;
  const int steps = 20000;
  const NoisePath path = generate_path(2024, 1, dt, steps);
  double s1 = 0.0, s2 = 0.0;
  for (int m = 0; m < steps; ++m) {
    const double x = path.increment(m, 1);
    s1 += x;
    s2 += x * x;
  }
  const double mean = s1 / steps;
  const double var = s2 / steps - mean * mean;
  CHECK(std::abs(mean) <= 5.0 * std::sqrt(dt / steps));
  CHECK(std::abs(var - dt) <= 5.0 * dt * std::sqrt(2.0 / steps));
}

TEST_CASE("pointwise noise increment composes sigma basis and increments") {
  const TorusGrid g = TorusGrid::make(1, 8);
  const CoefficientSet c = builtin_coefficients("trig");
  const NoisePath path = generate_path(21, 3, 0.01, 4);
  const NoiseBasis& basis = NoiseBasis::shared(g, 3);
  const ScalarField u = ScalarField::constant(g, 0.9);
  const ScalarField out = noise_increment(c, u, path, 2);
  for (int i = 0; i < g.n; ++i) {
    double want = 0.0;
    for (int k = 1; k <= 3; ++k)
      want += c.sigma(k, 0.9) * basis.fields[static_cast<std::size_t>(k - 1)].at(i) *
              path.increment(2, k);
    // The row evaluator walks sin(k y) by angle addition, so the match is
    // tight but not bitwise.
    CHECK(out.at(i) == doctest::Approx(want).epsilon(1e-12).scale(1.0));
  }
}
