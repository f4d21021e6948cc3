#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "ecoevo/error.hpp"
#include "ecoevo/rng.hpp"
#include "ecoevo/spaces.hpp"

namespace ecoevo {

inline constexpr int kRejectionRetryCap = 10000;

/// Draw from N(mean, sd^2) conditioned to `range` by rejection.
inline double sample_conditioned_normal(Rng& rng, double mean, double sd, const Interval& range,
                                        int max_tries = kRejectionRetryCap) {
  if (sd <= 0.0) {
    if (range.contains(mean)) return mean;
    throw Error(Errc::RejectionLimit, "degenerate kernel centred outside its range");
  }
  for (int i = 0; i < max_tries; ++i) {
    const double z = rng.normal(mean, sd);
    if (range.contains(z)) return z;
  }
  throw Error(Errc::RejectionLimit, "conditioned normal: no acceptance after " +
                                        std::to_string(max_tries) + " draws");
}

/// P(a <= N(0, sd^2) <= b).
inline double normal_mass(double sd, double a, double b) {
  const double s = sd * std::numbers::sqrt2;
  return 0.5 * (std::erf(b / s) - std::erf(a / s));
}

/// Density of N(0, sd^2) restricted to [a, b] and renormalized.
inline double conditioned_normal_density(double k, double sd, double a, double b) {
  if (k < a || k > b) return 0.0;
  const double z = k / sd;
  const double phi = std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
  return phi / normal_mass(sd, a, b);
}

}  // namespace ecoevo
