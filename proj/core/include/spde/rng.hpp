#pragma once

#include <array>
#include <cstdint>

namespace spde::rng {

// Philox4x32-10 block cipher. Every (key, counter) pair yields an independent
// 128-bit block, so draws keyed by (seed, step, mode) reproduce bit-for-bit
// regardless of the order or the batch in which they are generated.
std::array<std::uint32_t, 4> philox4x32(std::uint64_t key,
                                        std::uint64_t ctr_hi,
                                        std::uint64_t ctr_lo);

// Uniform double in [0, 1) built from the first two words of the block.
double uniform01(std::uint64_t key, std::uint64_t ctr_hi, std::uint64_t ctr_lo);

// Standard normal via Box-Muller on the block's two 53-bit uniforms.
double gaussian(std::uint64_t key, std::uint64_t ctr_hi, std::uint64_t ctr_lo);

}  // namespace spde::rng
