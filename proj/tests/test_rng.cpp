#include <cmath>
#include <cstdint>

#include <doctest.h>

#include "spde/rng.hpp"

using namespace spde;

TEST_CASE("philox blocks are pure functions of key and counter") {
  const auto a = rng::philox4x32(0x1234, 5, 6);
  const auto b = rng::philox4x32(0x1234, 5, 6);
  CHECK(a == b);
  CHECK(rng::philox4x32(0x1234, 5, 7) != a);
  CHECK(rng::philox4x32(0x1234, 6, 6) != a);
  CHECK(rng::philox4x32(0x1235, 5, 6) != a);
}

TEST_CASE("uniform draws live in [0,1) and fill the interval") {
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int N = 100000;
  for (int i = 0; i < N; ++i) {
    const double u = rng::uniform01(42, 0, i);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo < 1e-3);
  CHECK(hi > 1.0 - 1e-3);
  // mean of U[0,1): sigma = 1/sqrt(12N), allow 5 sigma
  CHECK(std::abs(sum / N - 0.5) < 5.0 / std::sqrt(12.0 * N));
}

TEST_CASE("gaussian draws have standard moments") {
  const int N = 200000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < N; ++i) {
    const double g = rng::gaussian(7, 1, i);
    s1 += g;
    s2 += g * g;
    s4 += g * g * g * g;
  }
  const double mean = s1 / N;
  const double var = s2 / N - mean * mean;
  const double kurt = s4 / N;
  CHECK(std::abs(mean) < 5.0 / std::sqrt(double(N)));          // 5 sigma
  CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / N));       // 5 sigma
  CHECK(std::abs(kurt - 3.0) < 5.0 * std::sqrt(96.0 / N));     // Var[g^4] = 96
}

TEST_CASE("gaussian draws are reproducible and finite") {
  for (int i = 0; i < 1000; ++i) {
    const double g = rng::gaussian(11, 3, i);
    CHECK(std::isfinite(g));
    CHECK(g == rng::gaussian(11, 3, i));
  }
}
