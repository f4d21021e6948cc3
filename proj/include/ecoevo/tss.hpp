#pragma once

#include <cstddef>
#include <functional>
#include <limits>

#include "ecoevo/analytic.hpp"
#include "ecoevo/model.hpp"
#include "ecoevo/rng.hpp"

namespace ecoevo {

/// Trait substitution sequence state, time in trait-mutation units (real time / K).
struct TssState {
  double time = 0.0;
  double trait = 0.0;
  double marker = 0.0;
};

/// Law of the marker handed to a successful mutant.
using MarkerLaw = std::function<double(Rng&)>;

inline MarkerLaw dirac_marker(double u) {
  return [u](Rng&) { return u; };
}

struct TssJump {
  TssState state;
  bool censored = false;  // no accepted jump before the horizon
  std::size_t proposals = 0;
};

/// Next jump of the trait substitution sequence by thinning. Proposals arrive
/// at the envelope rate b(Y) n_Y; a proposal Y + k, k ~ m(Y, .), is accepted
/// with probability [f(Y + k; Y)]_+ / b(Y + k), which is at most 1.
inline TssJump tss_next_jump(const ModelSpec& spec, const TssState& from, const MarkerLaw& law,
                             Rng& rng, double horizon) {
  TssJump out{from, false, 0};
  const Equilibrium eq = equilibrium(spec.ecology, from.trait);
  const double envelope = spec.ecology.b(from.trait) * eq.mass;
  if (!(envelope > 0.0)) {
    out.state.time = horizon;
    out.censored = true;
    return out;
  }
  double t = from.time;
  while (true) {
    t += rng.exponential(envelope);
    if (t > horizon) {
      out.state.time = horizon;
      out.censored = true;
      return out;
    }
    ++out.proposals;
    const double y = spec.sample_trait_mutant(rng, from.trait);
    if (rng.uniform() < jump_acceptance(spec, from.trait, y)) {
      out.state = {t, y, law(rng)};
      return out;
    }
  }
}

}  // namespace ecoevo
