#pragma once

#include <algorithm>
#include <cmath>

#include "ecoevo/analytic.hpp"
#include "ecoevo/error.hpp"
#include "ecoevo/model.hpp"
#include "ecoevo/rng.hpp"

namespace ecoevo {

/// Coefficients of
///   dW = rbar b (q_A (1 - W) - q_a W) dt + sqrt(2 b / n_hat W (1 - W)) dB
/// for the frequency W of allele a.
struct WfParams {
  double birth = 1.0;
  double n_hat = 1.0;
  double rbar = 0.0;
  double q_a = 0.0;  // a -> A
  double q_A = 0.0;  // A -> a

  double drift(double w) const { return rbar * birth * (q_A * (1.0 - w) - q_a * w); }
  double diffusion2(double w) const { return 2.0 * birth / n_hat * w * (1.0 - w); }
  bool mutation_free() const { return rbar == 0.0 || (q_a == 0.0 && q_A == 0.0); }
};

/// Parameters at resident trait x of a two-allele model.
inline WfParams wf_params(const ModelSpec& spec, double x) {
  const auto* k = std::get_if<TwoAllele>(&spec.mutation.marker_kernel);
  if (!k) throw Error(Errc::InvalidArgument, "Wright-Fisher limit needs the two-allele kernel");
  const Equilibrium eq = equilibrium(spec.ecology, x);
  if (!eq.viable) throw Error(Errc::InvalidArgument, "Wright-Fisher needs a viable trait");
  return {spec.ecology.b(x), eq.mass, spec.mutation.rbar(spec.K), k->q_a, k->q_A};
}

struct WfState {
  double time = 0.0;
  double trait = 0.0;
  double w_a = 0.5;
};

/// One Euler-Maruyama step followed by clamping to [0, 1]. Without mutation
/// the boundaries are absorbing. Sets *clamped when the clamp was active.
inline WfState wf_step(WfState s, const WfParams& p, double dt, Rng& rng,
                       bool* clamped = nullptr) {
  if (!(dt > 0.0)) throw Error(Errc::InvalidArgument, "wf_step: dt must be > 0");
  if (clamped) *clamped = false;
  s.time += dt;
  if (p.mutation_free() && (s.w_a <= 0.0 || s.w_a >= 1.0)) return s;
  const double w = s.w_a + p.drift(s.w_a) * dt +
                   std::sqrt(p.diffusion2(s.w_a) * dt) * rng.normal();
  s.w_a = std::clamp(w, 0.0, 1.0);
  if (clamped) *clamped = (s.w_a != w);
  return s;
}

/// Steps of size dt up to t_end; the last step is shortened to land on t_end.
inline WfState wf_advance(WfState s, const WfParams& p, double t_end, double dt, Rng& rng) {
  while (s.time < t_end) {
    const double h = std::min(dt, t_end - s.time);
    s = wf_step(s, p, h, rng);
    if (t_end - s.time < 1e-12 * std::max(1.0, t_end)) s.time = t_end;
  }
  return s;
}

}  // namespace ecoevo
