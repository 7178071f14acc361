#pragma once

#include <cstdint>
#include <random>

namespace telesim {

/// SplitMix64 finalizer. Used to derive independent sub-seeds from a master
/// seed and a stream number so that parallel work stays reproducible.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

/// The project-wide generator: 64-bit Mersenne Twister (std::mt19937_64),
/// whose output sequence is fixed by the C++ standard.
using Rng = std::mt19937_64;

/// Unbiased integer in [0, bound) via Lemire's multiply-and-reject method.
/// std::uniform_int_distribution is avoided because its algorithm is
/// implementation-defined, which would break cross-platform reproducibility.
inline std::uint64_t bounded(Rng& rng, std::uint64_t bound) {
  if (bound == 0) return 0;
  unsigned __int128 m = static_cast<unsigned __int128>(rng()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(rng()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace telesim
