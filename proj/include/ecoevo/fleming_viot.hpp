#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <variant>
#include <vector>

#include "ecoevo/analytic.hpp"
#include "ecoevo/error.hpp"
#include "ecoevo/ibm.hpp"
#include "ecoevo/kernels.hpp"
#include "ecoevo/model.hpp"
#include "ecoevo/rng.hpp"
#include "ecoevo/stats.hpp"

namespace ecoevo {

// Moran particle approximation of the trait-indexed Fleming-Viot marker law.
//
// Resampling: every ordered pair (i, j), i != j, fires at rate bracket / 2 and
// replaces particle i by a copy of particle j. For phi(u) the empirical mean
// <F, phi> then has predictable quadratic variation
//   sum_{i != j} (bracket / 2) (phi_j - phi_i)^2 / N^2 = bracket * Var_F(phi),
// which for a monomorphic population is 2 b(x) / n_x * Var_F(phi).
//
// Mutation: each particle fires at rate b(x) * thinning and moves by a kernel
// step whose generator, multiplied by that rate, is b(x) A. For A = (s2/2) phi''
// the step is N(0, s2 / thinning) conditioned to the marker interval. For the
// two-allele generator each particle fires at rate b(x) rbar and switches
// a -> A with probability q_a, A -> a with probability q_A.

/// Continuous marker step N(0, variance) conditioned to `range`.
struct ContinuousStep {
  double variance = 0.0;
  Interval range;
};

/// Two-allele switch probabilities; alleles a = 0 and A = 1.
struct AlleleFlip {
  double q_a = 0.0;
  double q_A = 0.0;
};

struct FvParams {
  double pair_rate = 0.0;      // per ordered pair
  double mutation_rate = 0.0;  // per particle
  std::variant<ContinuousStep, AlleleFlip> step;

  /// Quadratic-variation coefficient of <F, phi> per unit Var_F(phi).
  double bracket() const { return 2.0 * pair_rate; }
};

inline constexpr double kDefaultMutationThinning = 100.0;

/// Parameters for a marker population that resamples with bracket coefficient
/// `bracket` and mutates with drift `birth` * A, A taken from `spec`.
inline FvParams fv_params_with_bracket(const ModelSpec& spec, double birth, double bracket,
                                       double thinning = kDefaultMutationThinning) {
  if (!(thinning > 0.0)) throw Error(Errc::InvalidArgument, "mutation thinning must be > 0");
  FvParams p;
  p.pair_rate = bracket / 2.0;
  if (const auto* flip = std::get_if<TwoAllele>(&spec.mutation.marker_kernel)) {
    p.mutation_rate = birth * spec.mutation.rbar(spec.K);
    p.step = AlleleFlip{flip->q_a, flip->q_A};
  } else {
    p.mutation_rate = birth * thinning;
    p.step = ContinuousStep{spec.mutation.sigma2(spec.K) / thinning, spec.marker_space.interval()};
  }
  return p;
}

/// Monomorphic marker dynamics at trait x: bracket 2 b(x) / n_x, drift b(x) A.
inline FvParams fv_params(const ModelSpec& spec, double x,
                          double thinning = kDefaultMutationThinning) {
  const Equilibrium eq = equilibrium(spec.ecology, x);
  if (!eq.viable) throw Error(Errc::InvalidArgument, "Fleming-Viot needs a viable trait");
  return fv_params_with_bracket(spec, spec.ecology.b(x), 2.0 * spec.ecology.b(x) / eq.mass,
                                thinning);
}

/// Same construction from raw numbers: birth rate b, equilibrium mass n_hat and
/// continuous diffusion coefficient sigma2 on `range`.
inline FvParams fv_params_continuous(double b, double n_hat, double sigma2, Interval range,
                                     double thinning = kDefaultMutationThinning) {
  FvParams p;
  p.pair_rate = b / n_hat;
  p.mutation_rate = b * thinning;
  p.step = ContinuousStep{sigma2 / thinning, range};
  return p;
}

inline FvParams fv_params_two_allele(double b, double n_hat, double rbar, double q_a,
                                     double q_A) {
  FvParams p;
  p.pair_rate = b / n_hat;
  p.mutation_rate = b * rbar;
  p.step = AlleleFlip{q_a, q_A};
  return p;
}

enum class FvEventKind { None, Resample, Mutation };

class FvParticleSystem {
 public:
  FvParticleSystem(double trait, double n_hat, FvParams params, std::vector<double> particles)
      : trait_(trait), n_hat_(n_hat), params_(std::move(params)), particles_(std::move(particles)) {
    if (particles_.size() < 2) throw Error(Errc::InvalidArgument, "Moran system needs N >= 2");
    if (two_allele()) {
      // Alleles a occupy the front of the array.
      std::size_t a = 0;
      for (const double u : particles_) {
        if (u != 0.0 && u != 1.0) throw Error(Errc::OutOfSpace, "two-allele particle not in {0, 1}");
        a += (u == 0.0);
      }
      assign_partition(a);
    } else {
      const auto& range = std::get<ContinuousStep>(params_.step).range;
      for (const double u : particles_)
        if (!range.contains(u)) throw Error(Errc::OutOfSpace, "particle outside marker space");
      resync();
    }
  }

  /// N particles all at u.
  static FvParticleSystem dirac(double trait, double n_hat, FvParams params, std::size_t n,
                                double u) {
    return FvParticleSystem(trait, n_hat, std::move(params), std::vector<double>(n, u));
  }

  double time = 0.0;

  double trait() const { return trait_; }
  double n_hat() const { return n_hat_; }
  const FvParams& params() const { return params_; }
  std::size_t size() const { return particles_.size(); }
  const std::vector<double>& particles() const { return particles_; }
  bool two_allele() const { return std::holds_alternative<AlleleFlip>(params_.step); }
  std::size_t allele_a_count() const { return count_a_; }

  double mean() const { return sum_ / static_cast<double>(size()); }
  double variance() const {
    const double m = mean();
    return std::max(0.0, sumsq_ / static_cast<double>(size()) - m * m);
  }
  std::vector<MarkerAtom> atoms() const {
    auto atoms = collect_atoms(particles_);
    for (auto& a : atoms) a.weight /= static_cast<double>(size());
    return atoms;
  }
  double heterozygosity() const { return ecoevo::heterozygosity(atoms()); }

  /// Switches to new parameters, e.g. after the resident trait changed.
  void retarget(double trait, double n_hat, FvParams params) {
    if (two_allele() != std::holds_alternative<AlleleFlip>(params.step))
      throw Error(Errc::InvalidArgument, "cannot switch marker model of a running system");
    trait_ = trait;
    n_hat_ = n_hat;
    params_ = std::move(params);
  }

  /// Collapses the cloud onto a single marker value.
  void reset_to(double u) {
    if (two_allele()) {
      assign_partition(u == 0.0 ? size() : 0);
    } else {
      std::fill(particles_.begin(), particles_.end(), u);
      resync();
    }
  }

  /// Total rate of events that can change the cloud.
  double total_rate() const {
    const double n = static_cast<double>(size());
    if (two_allele()) {
      const auto& f = std::get<AlleleFlip>(params_.step);
      const double a = static_cast<double>(count_a_);
      const double A = n - a;
      return 2.0 * params_.pair_rate * a * A + params_.mutation_rate * (f.q_a * a + f.q_A * A);
    }
    return params_.pair_rate * n * (n - 1.0) + params_.mutation_rate * n;
  }

  /// One event if it happens by `t_limit`; otherwise the clock moves to `t_limit`.
  FvEventKind step_within(Rng& rng, double t_limit) {
    const double total = total_rate();
    if (!(total > 0.0)) {
      time = t_limit;
      return FvEventKind::None;
    }
    const double wait = rng.exponential(total);
    if (time + wait > t_limit) {
      time = t_limit;
      return FvEventKind::None;
    }
    time += wait;
    return two_allele() ? fire_two_allele(rng, total) : fire_continuous(rng, total);
  }

  void advance_to(double t_end, Rng& rng) {
    while (time < t_end) step_within(rng, t_end);
  }

 private:
  FvEventKind fire_continuous(Rng& rng, double total) {
    const std::size_t n = size();
    const double resample = params_.pair_rate * static_cast<double>(n) * static_cast<double>(n - 1);
    if (rng.uniform() * total < resample) {
      const auto i = static_cast<std::size_t>(rng.index(n));
      auto j = static_cast<std::size_t>(rng.index(n - 1));
      if (j >= i) ++j;
      replace(i, particles_[j]);
      return FvEventKind::Resample;
    }
    const auto& s = std::get<ContinuousStep>(params_.step);
    const auto i = static_cast<std::size_t>(rng.index(n));
    replace(i, sample_conditioned_normal(rng, particles_[i], std::sqrt(s.variance), s.range));
    return FvEventKind::Mutation;
  }

  // Only events that change the allele counts are generated; resampling among
  // equal particles leaves the cloud unchanged and is skipped.
  FvEventKind fire_two_allele(Rng& rng, double total) {
    const auto& f = std::get<AlleleFlip>(params_.step);
    const double a = static_cast<double>(count_a_);
    const double A = static_cast<double>(size()) - a;
    const double copy_rate = params_.pair_rate * a * A;  // each direction
    double pick = rng.uniform() * total;
    if (pick < copy_rate) {
      set_allele_count(count_a_ + 1);  // an A particle copies an a
      return FvEventKind::Resample;
    }
    pick -= copy_rate;
    if (pick < copy_rate) {
      set_allele_count(count_a_ - 1);
      return FvEventKind::Resample;
    }
    pick -= copy_rate;
    if (pick < params_.mutation_rate * f.q_a * a) {
      set_allele_count(count_a_ - 1);
    } else {
      set_allele_count(count_a_ + 1);
    }
    return FvEventKind::Mutation;
  }

  void replace(std::size_t i, double u) {
    const double old = particles_[i];
    particles_[i] = u;
    sum_ += u - old;
    sumsq_ += u * u - old * old;
    if (++since_resync_ == (std::uint64_t{1} << 20)) resync();
  }

  void set_allele_count(std::size_t a) {
    const std::size_t n = size();
    if (a > n) a = n;
    // Keep the partition: [0, a) hold allele a (0.0), [a, n) allele A (1.0).
    if (a > count_a_) {
      for (std::size_t i = count_a_; i < a; ++i) particles_[i] = 0.0;
    } else {
      for (std::size_t i = a; i < count_a_; ++i) particles_[i] = 1.0;
    }
    count_a_ = a;
    sum_ = static_cast<double>(n - a);
    sumsq_ = sum_;
  }

  void assign_partition(std::size_t a) {
    std::fill(particles_.begin(), particles_.begin() + static_cast<std::ptrdiff_t>(a), 0.0);
    std::fill(particles_.begin() + static_cast<std::ptrdiff_t>(a), particles_.end(), 1.0);
    count_a_ = a;
    sum_ = static_cast<double>(size() - a);
    sumsq_ = sum_;
  }

  void resync() {
    sum_ = 0.0;
    sumsq_ = 0.0;
    for (const double u : particles_) {
      sum_ += u;
      sumsq_ += u * u;
    }
    since_resync_ = 0;
  }

  double trait_;
  double n_hat_;
  FvParams params_;
  std::vector<double> particles_;
  double sum_ = 0.0;
  double sumsq_ = 0.0;
  std::size_t count_a_ = 0;
  std::uint64_t since_resync_ = 0;
};

/// One Moran event (skipping the waiting time check).
inline FvEventKind fv_step(FvParticleSystem& sys, Rng& rng) {
  return sys.step_within(rng, std::numeric_limits<double>::infinity());
}

}  // namespace ecoevo
