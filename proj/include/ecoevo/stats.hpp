#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ecoevo/error.hpp"
#include "ecoevo/ibm.hpp"

namespace ecoevo {

struct SummaryStats {
  double estimate = 0.0;
  double standard_error = 0.0;
  std::pair<double, double> wilson_ci_95{0.0, 1.0};
  std::size_t n_trials = 0;
};

/// Wilson score interval for a binomial proportion.
inline std::pair<double, double> wilson_interval(std::size_t successes, std::size_t n,
                                                 double z = 1.959963984540054) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  // The bounds are exactly 0 and 1 at the extremes; the formula loses that to rounding.
  const double lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
  const double hi = successes == n ? 1.0 : std::min(1.0, centre + half);
  return {lo, hi};
}

inline SummaryStats proportion(std::size_t successes, std::size_t n) {
  SummaryStats s;
  s.n_trials = n;
  if (n == 0) return s;
  s.estimate = static_cast<double>(successes) / static_cast<double>(n);
  s.standard_error = std::sqrt(s.estimate * (1.0 - s.estimate) / static_cast<double>(n));
  s.wilson_ci_95 = wilson_interval(successes, n);
  return s;
}

struct MeanStats {
  double mean = 0.0;
  double variance = 0.0;        // unbiased sample variance
  double standard_error = 0.0;  // sqrt(variance / n)
  std::size_t n = 0;
};

inline MeanStats mean_stats(std::span<const double> xs) {
  MeanStats s;
  s.n = xs.size();
  if (xs.empty()) return s;
  double sum = 0.0;
  for (const double x : xs) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (const double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.variance = ss / static_cast<double>(s.n - 1);
    s.standard_error = std::sqrt(s.variance / static_cast<double>(s.n));
  }
  return s;
}

/// Two-sample Kolmogorov-Smirnov statistic sup_z |F_a(z) - F_b(z)|.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error(Errc::EmptySample, "ks_distance needs two nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double worst = 0.0;
  while (i < a.size() && j < b.size()) {
    const double z = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= z) ++i;
    while (j < b.size() && b[j] <= z) ++j;
    worst = std::max(worst, std::abs(i / na - j / nb));
  }
  return worst;
}

inline constexpr double kNormalizationTolerance = 1e-9;

namespace detail {
inline void require_normalized(std::span<const MarkerAtom> atoms) {
  double total = 0.0;
  for (const auto& a : atoms) {
    if (a.weight < 0.0) throw Error(Errc::NotNormalized, "negative atom weight");
    total += a.weight;
  }
  if (std::abs(total - 1.0) > kNormalizationTolerance)
    throw Error(Errc::NotNormalized, "atom weights sum to " + std::to_string(total));
}
}  // namespace detail

/// Largest atom of a normalized marker law. 1 means a Dirac mass.
inline double bottleneck_metric(std::span<const MarkerAtom> atoms) {
  detail::require_normalized(atoms);
  double best = 0.0;
  for (const auto& a : atoms) best = std::max(best, a.weight);
  return best;
}

/// 1 - sum_i p_i^2 of a normalized marker law.
inline double heterozygosity(std::span<const MarkerAtom> atoms) {
  detail::require_normalized(atoms);
  double s = 0.0;
  for (const auto& a : atoms) s += a.weight * a.weight;
  return std::max(0.0, 1.0 - s);
}

}  // namespace ecoevo
