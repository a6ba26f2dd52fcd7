#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fednoil {

using Rng = std::mt19937_64;

// Independent random streams. Every consumer of randomness draws from its own
// stream derived from the master seed, so results do not depend on the order
// or the degree of parallelism in which clients are processed.
enum class Stream : std::uint64_t {
  kData = 1,
  kTestData = 2,
  kPartition = 3,
  kNoise = 4,
  kInit = 5,
  kServer = 6,
  kClient = 7,
};

std::uint64_t splitmix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> tags);

Rng make_stream(std::uint64_t master, Stream stream, std::uint64_t a = 0,
                std::uint64_t b = 0);

// Uniform double in [0, 1) built from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). n must be positive.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

double standard_normal(Rng& rng);

}  // namespace fednoil
