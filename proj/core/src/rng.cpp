#include "spde/rng.hpp"

#include <cmath>
#include <numbers>

namespace spde::rng {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline std::uint32_t lo32(std::uint64_t x) { return static_cast<std::uint32_t>(x); }
inline std::uint32_t hi32(std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); }

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::uint64_t key,
                                        std::uint64_t ctr_hi,
                                        std::uint64_t ctr_lo) {
  std::uint32_t x0 = lo32(ctr_lo), x1 = hi32(ctr_lo);
  std::uint32_t x2 = lo32(ctr_hi), x3 = hi32(ctr_hi);
  std::uint32_t k0 = lo32(key), k1 = hi32(key);

  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, x0, hi0, lo0);
    mulhilo(kMul1, x2, hi1, lo1);
    const std::uint32_t y0 = hi1 ^ x1 ^ k0;
    const std::uint32_t y1 = lo1;
    const std::uint32_t y2 = hi0 ^ x3 ^ k1;
    const std::uint32_t y3 = lo0;
    x0 = y0;
    x1 = y1;
    x2 = y2;
    x3 = y3;
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return {x0, x1, x2, x3};
}

double uniform01(std::uint64_t key, std::uint64_t ctr_hi, std::uint64_t ctr_lo) {
  const auto r = philox4x32(key, ctr_hi, ctr_lo);
  const std::uint64_t bits = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

double gaussian(std::uint64_t key, std::uint64_t ctr_hi, std::uint64_t ctr_lo) {
  const auto r = philox4x32(key, ctr_hi, ctr_lo);
  const std::uint64_t b0 = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
  const std::uint64_t b1 = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
  // u1 in (0, 1] keeps the log finite; u2 in [0, 1).
  const double u1 = (static_cast<double>(b0 >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(b1 >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace spde::rng
