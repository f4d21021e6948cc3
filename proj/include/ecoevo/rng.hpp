#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ecoevo {

/// SplitMix64 finalizer. Fixed constants; identical output on every platform.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed of replicate `index` under `master`: mix64(master ^ mix64(index)).
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(master ^ mix64(index));
}

/// Named sub-streams of one replicate seed.
enum class Substream : std::uint64_t {
  Demography = 0x44454D4F,  // "DEMO"
  Marker = 0x4D41524B,      // "MARK"
  Oracle = 0x4F52434C,      // "ORCL"
  First = 0x46495253,       // "FIRS"
  Second = 0x5345434F,      // "SECO"
};

constexpr std::uint64_t substream_seed(std::uint64_t seed, Substream tag) noexcept {
  return stream_seed(seed, static_cast<std::uint64_t>(tag));
}

/// 64-bit Mersenne Twister with the handful of draws the simulators need.
/// Uniform and exponential variates are computed here from raw 64-bit words
/// so they do not depend on the standard library's distribution algorithms.
class Rng {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open0() { return 1.0 - uniform(); }

  double exponential(double rate) { return -std::log(uniform_open0()) / rate; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n). Requires n > 0.
  std::uint64_t index(std::uint64_t n) {
    // Lemire's nearly-divisionless method with rejection of the biased region.
    unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(engine_()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal by the Marsaglia polar method. Stateless between calls.
  double normal() {
    double v1 = 0.0;
    double s = 0.0;
    do {
      v1 = 2.0 * uniform() - 1.0;
      const double v2 = 2.0 * uniform() - 1.0;
      s = v1 * v1 + v2 * v2;
    } while (s >= 1.0 || s == 0.0);
    return v1 * std::sqrt(-2.0 * std::log(s) / s);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ecoevo
