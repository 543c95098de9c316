#pragma once

#include <cstdint>
#include <random>

namespace snot {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Seed derivation for independent streams. A child seed is
//   derive_seed(base, stream) = splitmix64(base ^ splitmix64(stream + 0x9E3779B97F4A7C15))
// so every (base, stream) pair maps to an unrelated 64-bit seed, and sweeps can hand out
// stream ids (replicate index, grid point, ...) without coordinating.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(derive_seed(seed, stream));
}

// Fixed stream ids used across the code base.
namespace streams {
inline constexpr std::uint64_t kSource = 1;
inline constexpr std::uint64_t kTarget = 2;
inline constexpr std::uint64_t kNoise = 3;
inline constexpr std::uint64_t kInitT = 4;
inline constexpr std::uint64_t kInitV = 5;
inline constexpr std::uint64_t kEval = 6;
inline constexpr std::uint64_t kReplicate = 100;
}  // namespace streams

}  // namespace snot
