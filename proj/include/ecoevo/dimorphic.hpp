#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "ecoevo/analytic.hpp"
#include "ecoevo/error.hpp"
#include "ecoevo/fleming_viot.hpp"
#include "ecoevo/model.hpp"
#include "ecoevo/rng.hpp"
#include "ecoevo/sfvp.hpp"

namespace ecoevo {

// Marker laws of two coexisting traits x0 and y at their Lotka-Volterra
// equilibrium (n1, n2). Each evolves as its own Fleming-Viot process with drift
// b(.) A and a bracket coefficient that depends on both traits.

/// Bracket coefficients (first for x0, second for y).
inline std::pair<double, double> dimorphic_brackets(const ModelSpec& spec, double x0, double y,
                                                    double n1, double n2) {
  const auto& e = spec.ecology;
  const double total = n1 + n2;
  if (!(total > 0.0)) throw Error(Errc::InvalidArgument, "dimorphic_brackets: empty population");
  const double first = (e.b(x0) + e.d(x0) + e.eta(x0) * (e.C(0.0) * n1 + e.C(x0 - y) * n2)) / total;
  const double second = (e.b(y) + e.d(y) + e.eta(y) * (e.C(y - x0) * n1 + e.C(0.0) * n2)) / total;
  return {first, second};
}

struct DimorphicOptions {
  double mutation_thinning = kDefaultMutationThinning;
  double sampling_interval = 0.0;  // <= 0 records only the start and the end
  /// Called at every recorded time with 0 for the x0 cloud and 1 for the y cloud.
  std::function<void(int, const FvParticleSystem&)> on_sample;
};

struct DimorphicResult {
  CoexistenceEquilibrium equilibrium;
  std::pair<double, double> brackets;
  std::vector<TrajectoryRow> first;   // trait x0
  std::vector<TrajectoryRow> second;  // trait y
  std::optional<FvParticleSystem> first_final;
  std::optional<FvParticleSystem> second_final;
};

/// Runs both marker laws on [0, horizon]. `first_particles` is the resident
/// law (e.g. the cloud at the mutant's arrival) and `second_particles` the
/// mutant's (typically N copies of the founder marker). The two clouds draw
/// from independent generators seeded by `seed`.
inline DimorphicResult dimorphic_fv_run(const ModelSpec& spec, double x0, double y,
                                        std::vector<double> first_particles,
                                        std::vector<double> second_particles, double horizon,
                                        std::uint64_t seed, const DimorphicOptions& opt = {},
                                        std::optional<CoexistenceEquilibrium> equilibrium = {}) {
  if (!equilibrium) equilibrium = lv_coexistence_equilibrium(spec, x0, y);
  if (!equilibrium)
    throw Error(Errc::NoCoexistence, "traits have no positive Lotka-Volterra equilibrium");
  DimorphicResult out;
  out.equilibrium = *equilibrium;
  out.brackets =
      dimorphic_brackets(spec, x0, y, equilibrium->first, equilibrium->second);

  FvParticleSystem a(x0, equilibrium->first,
                     fv_params_with_bracket(spec, spec.ecology.b(x0), out.brackets.first,
                                            opt.mutation_thinning),
                     std::move(first_particles));
  FvParticleSystem b(y, equilibrium->second,
                     fv_params_with_bracket(spec, spec.ecology.b(y), out.brackets.second,
                                            opt.mutation_thinning),
                     std::move(second_particles));
  Rng rng_a(substream_seed(seed, Substream::First));
  Rng rng_b(substream_seed(seed, Substream::Second));

  auto record = [&](int which, FvParticleSystem& sys, Rng& rng, std::vector<TrajectoryRow>& rows) {
    auto sample = [&] {
      rows.push_back(summarize(sys));
      if (opt.on_sample) opt.on_sample(which, sys);
    };
    sample();
    if (opt.sampling_interval > 0.0) {
      for (std::size_t k = 1; static_cast<double>(k) * opt.sampling_interval <= horizon; ++k) {
        sys.advance_to(static_cast<double>(k) * opt.sampling_interval, rng);
        sample();
      }
    }
    sys.advance_to(horizon, rng);
    if (rows.back().time != sys.time) sample();
  };
  record(0, a, rng_a, out.first);
  record(1, b, rng_b, out.second);
  out.first_final = std::move(a);
  out.second_final = std::move(b);
  return out;
}

}  // namespace ecoevo
