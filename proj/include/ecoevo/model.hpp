#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <variant>

#include "ecoevo/error.hpp"
#include "ecoevo/kernels.hpp"
#include "ecoevo/param_fn.hpp"
#include "ecoevo/rng.hpp"
#include "ecoevo/spaces.hpp"

namespace ecoevo {

/// Trait-dependent demography. No rate ever reads the marker.
struct EcologyModel {
  ParamFn birth;             // b(x)
  ParamFn death;             // d(x)
  ParamFn comp_sensitivity;  // eta(x)
  ParamFn comp_kernel;       // C(x - y), evaluated at the trait difference

  double b(double x) const { return birth(x); }
  double d(double x) const { return death(x); }
  double eta(double x) const { return comp_sensitivity(x); }
  double C(double dz) const { return comp_kernel(dz); }

  bool operator==(const EcologyModel&) const = default;
};

/// Bounds of the ecology over the trait space, measured on a uniform grid.
struct EcologyBounds {
  double b_min = std::numeric_limits<double>::infinity();
  double b_max = 0.0;
  double d_min = std::numeric_limits<double>::infinity();
  double d_max = 0.0;
  double eta_c_min = std::numeric_limits<double>::infinity();
  double argmin_x = 0.0;  // grid point (x, y) where eta(x) C(x - y) is smallest
  double argmin_y = 0.0;
};

inline EcologyBounds ecology_bounds(const EcologyModel& eco, const TraitSpace& space,
                                    int grid = 201) {
  EcologyBounds out;
  const double h = space.width() / (grid - 1);
  for (int i = 0; i < grid; ++i) {
    const double x = space.lo + i * h;
    out.b_min = std::min(out.b_min, eco.b(x));
    out.b_max = std::max(out.b_max, eco.b(x));
    out.d_min = std::min(out.d_min, eco.d(x));
    out.d_max = std::max(out.d_max, eco.d(x));
    for (int j = 0; j < grid; ++j) {
      const double y = space.lo + j * h;
      const double v = eco.eta(x) * eco.C(x - y);
      if (v < out.eta_c_min) {
        out.eta_c_min = v;
        out.argmin_x = x;
        out.argmin_y = y;
      }
    }
  }
  return out;
}

/// Marker displacement N(0, variance) conditioned to an interval marker space.
struct GaussianStep {
  double variance = 0.0;
  bool operator==(const GaussianStep&) const = default;
};

/// Two-allele switch: a -> A with probability q_a, A -> a with probability q_A,
/// applied when a marker mutation occurs. Allele a is marker value 0, A is 1.
struct TwoAllele {
  double q_a = 0.0;
  double q_A = 0.0;
  bool operator==(const TwoAllele&) const = default;
};

using MarkerKernel = std::variant<GaussianStep, TwoAllele>;

struct MutationModel {
  double trait_variance = 0.1;  // variance of the trait kernel m(x, .)
  MarkerKernel marker_kernel = GaussianStep{};
  double p_K = 0.0;  // trait mutation probability per birth
  double q_K = 0.0;  // marker mutation probability per birth

  bool two_allele() const { return std::holds_alternative<TwoAllele>(marker_kernel); }

  /// r_K = q_K / p_K; infinite when trait mutations are switched off.
  double r_K() const {
    return p_K > 0.0 ? q_K / p_K : std::numeric_limits<double>::infinity();
  }

  /// Nominal ratio r_K / K under p_K = 1/K^2, i.e. q_K K. This is the
  /// two-allele rate r-bar and the factor in front of sigma_K^2 below.
  double rbar(int K) const { return q_K * K; }

  /// Diffusion coefficient sigma^2 = r_K sigma_K^2 / K of the continuous
  /// marker generator (sigma^2 / 2) phi''.
  double sigma2(int K) const {
    if (const auto* g = std::get_if<GaussianStep>(&marker_kernel)) return rbar(K) * g->variance;
    return 0.0;
  }

  bool operator==(const MutationModel&) const = default;
};

struct ModelSpec {
  EcologyModel ecology;
  MutationModel mutation;
  TraitSpace trait_space{-1.0, 1.0};
  MarkerSpace marker_space{Interval{-2.0, 2.0}};
  int K = 1000;

  /// Draws a mutant trait from m(x, .) conditioned to the trait space.
  double sample_trait_mutant(Rng& rng, double x) const {
    return sample_conditioned_normal(rng, x, std::sqrt(mutation.trait_variance), trait_space);
  }

  /// Marker of an offspring whose marker mutated.
  double sample_marker_mutant(Rng& rng, double u) const {
    return std::visit(
        [&](const auto& k) -> double {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, GaussianStep>) {
            return sample_conditioned_normal(rng, u, std::sqrt(k.variance),
                                             marker_space.interval());
          } else {
            const double flip = (u == 0.0) ? k.q_a : k.q_A;
            return rng.bernoulli(flip) ? 1.0 - u : u;
          }
        },
        mutation.marker_kernel);
  }

  /// Throws ConfigError naming the offending field or grid point.
  void validate() const {
    if (K < 1) throw Error(Errc::ConfigError, "model.K: must be a positive integer");
    trait_space.validate("model.trait_space");
    marker_space.validate("model.marker_space");
    if (!(mutation.trait_variance > 0.0))
      throw Error(Errc::ConfigError, "model.mutation.trait_variance: must be > 0");
    if (!(mutation.p_K >= 0.0 && mutation.p_K < 1.0))
      throw Error(Errc::ConfigError, "model.mutation.p_K: must lie in [0, 1)");
    if (!(mutation.q_K >= 0.0 && mutation.q_K < 1.0))
      throw Error(Errc::ConfigError, "model.mutation.q_K: must lie in [0, 1)");
    if (const auto* g = std::get_if<GaussianStep>(&mutation.marker_kernel)) {
      if (marker_space.discrete())
        throw Error(Errc::ConfigError,
                    "model.mutation.marker_kernel: gaussian kernel needs an interval marker space");
      if (!(g->variance > 0.0))
        throw Error(Errc::ConfigError, "model.mutation.marker_kernel.variance: must be > 0");
    } else {
      const auto& t = std::get<TwoAllele>(mutation.marker_kernel);
      if (!marker_space.discrete() || marker_space.alphabet().labels.size() != 2)
        throw Error(Errc::ConfigError,
                    "model.mutation.marker_kernel: two-allele kernel needs a two-label marker space");
      if (!(t.q_a >= 0.0 && t.q_a <= 1.0))
        throw Error(Errc::ConfigError, "model.mutation.marker_kernel.q_a: must lie in [0, 1]");
      if (!(t.q_A >= 0.0 && t.q_A <= 1.0))
        throw Error(Errc::ConfigError, "model.mutation.marker_kernel.q_A: must lie in [0, 1]");
    }
    const EcologyBounds bounds = ecology_bounds(ecology, trait_space);
    if (bounds.b_min < 0.0)
      throw Error(Errc::ConfigError, "model.ecology.birth: must be nonnegative on the trait space");
    if (bounds.d_min < 0.0)
      throw Error(Errc::ConfigError, "model.ecology.death: must be nonnegative on the trait space");
    if (!(bounds.eta_c_min > 0.0)) {
      std::ostringstream msg;
      msg << "model.ecology: eta(x) C(x - y) must be bounded below by a positive constant; "
          << "got " << bounds.eta_c_min << " at (x, y) = (" << bounds.argmin_x << ", "
          << bounds.argmin_y << ")";
      throw Error(Errc::ConfigError, msg.str());
    }
  }

  bool operator==(const ModelSpec&) const = default;
};

/// Ecology and mutation of the Dieckmann-Doebeli example at system size K:
/// b(x) = exp(-x^2 / (2 sigma_b^2)), d = 0, eta = 1,
/// C(z) = exp(-z^2 / (2 sigma_C^2)), trait space [-1, 1], marker space [-2, 2],
/// p_K = 1/K^2, q_K = sigma_K^2 = 1/sqrt(K), trait-kernel variance 0.1.
inline ModelSpec dieckmann_doebeli(int K = 1000, double sigma_b = 0.9, double sigma_c = 0.8) {
  ModelSpec spec;
  spec.K = K;
  spec.ecology.birth = ParamFn::gaussian(1.0, sigma_b);
  spec.ecology.death = ParamFn::constant(0.0);
  spec.ecology.comp_sensitivity = ParamFn::constant(1.0);
  spec.ecology.comp_kernel = ParamFn::gaussian(1.0, sigma_c);
  spec.trait_space = {-1.0, 1.0};
  spec.marker_space = {Interval{-2.0, 2.0}};
  const double kd = static_cast<double>(K);
  spec.mutation.trait_variance = 0.1;
  spec.mutation.p_K = 1.0 / (kd * kd);
  spec.mutation.q_K = 1.0 / std::sqrt(kd);
  spec.mutation.marker_kernel = GaussianStep{1.0 / std::sqrt(kd)};
  return spec;
}

/// Replaces the marker model by the two-allele {a, A} kernel.
inline ModelSpec with_two_alleles(ModelSpec spec, double q_K, double q_a, double q_A) {
  spec.marker_space = {DiscreteSpace{{"a", "A"}}};
  spec.mutation.marker_kernel = TwoAllele{q_a, q_A};
  spec.mutation.q_K = q_K;
  return spec;
}

}  // namespace ecoevo
