#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sdecay {

/// Deterministic random stream identified by (seed, stream id).
///
/// Backed by std::mt19937_64. The engine seed is a SplitMix64 mix of the pair, so
/// distinct stream ids give unrelated engine states. Identical (seed, stream) pairs
/// reproduce identical draws on the same build.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64/splitmix64";

  Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream), engine_(mix(seed, stream)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    for (;;) {
      const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  double normal() { return normal_(engine_); }

  /// Exp(1).
  double exponential() { return -std::log(uniform()); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  static std::uint64_t splitmix(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed;
    const std::uint64_t a = splitmix(s);
    s = stream ^ a;
    splitmix(s);
    return splitmix(s);
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace sdecay
