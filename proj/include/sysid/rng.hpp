#pragma once

#include <cmath>
#include <cstdint>

namespace sysid {

/// splitmix64: 64-bit state, one multiply-xorshift scramble per draw.
/// Every random quantity in the library (inputs, weights) comes from this
/// generator so that outputs are reproducible from a seed alone.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1), 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller. Two uniforms per draw, nothing cached,
  /// so the stream does not depend on call parity.
  double next_normal() {
    constexpr double two_pi = 6.283185307179586476925286766559005768;
    const double u1 = 1.0 - next_double();  // (0, 1]
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

 private:
  std::uint64_t state_;
};

/// Seed of the independent substream (seed, stream). Per-sequence substreams
/// keep generated data independent of generation order, so parallel and
/// serial builds produce identical bytes.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace sysid
