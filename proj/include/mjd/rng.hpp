#pragma once

// Portable, seedable random streams. std::mt19937_64 output is fully specified
// by the standard; the distributions below are written out so that draws are
// bit-identical across standard libraries.

#include <cstdint>
#include <random>

namespace mjd {

/// SplitMix64 finalizer; a bijective 64-bit mix.
[[nodiscard]] std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed of substream `stream` under master seed `seed`.
[[nodiscard]] std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1].
  double uniform_open_low();
  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();
  /// Fair +1 / -1.
  double sign();

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace mjd
