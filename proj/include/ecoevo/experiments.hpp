#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "ecoevo/analytic.hpp"
#include "ecoevo/error.hpp"
#include "ecoevo/ibm.hpp"
#include "ecoevo/model.hpp"
#include "ecoevo/parallel.hpp"
#include "ecoevo/rng.hpp"
#include "ecoevo/stats.hpp"
#include "ecoevo/wright_fisher.hpp"

namespace ecoevo {

struct FixationTrialResult {
  bool survived_at_tK = false;       // mutant mass above epsilon at t_K
  double marker_max_atom_at_tK = 0;  // bottleneck_metric of pi(y, .) at t_K; 0 when extinct
  bool fixation_completed = false;   // survived and the resident trait is gone
  double t_K_used = 0.0;
  double mutant_mass_at_tK = 0.0;
  std::uint64_t seed = 0;
};

struct FixationOptions {
  std::optional<double> t_K;      // default (log K)^2
  std::optional<double> epsilon;  // default 0.1 * n_y / 2
  double resident_marker = 0.0;
  double bottleneck_threshold = 0.95;
  unsigned threads = 1;
};

struct FixationReport {
  SummaryStats survival;
  SummaryStats fixation;
  /// Among surviving trials, the share whose bottleneck metric reaches the threshold.
  SummaryStats bottleneck;
  double oracle = 0.0;  // f(y; x0) / b(y)
  double t_K = 0.0;
  double epsilon = 0.0;
  std::vector<FixationTrialResult> trials;
};

inline double default_t_K(int K) {
  const double l = std::log(static_cast<double>(K));
  return l * l;
}

/// One invasion trial: resident at round(n_x0 K) individuals carrying
/// `resident_marker`, one mutant (y, v) with v drawn from the resident marker
/// law, exact simulation to t_K or until the mutant trait dies out.
inline FixationTrialResult fixation_trial(const ModelSpec& spec, double x0, double y,
                                          double t_K, double epsilon, double resident_marker,
                                          std::uint64_t seed) {
  IbmStreams rng(seed);
  PopulationState state = init_monomorphic(spec, x0, resident_marker, equilibrium_mass(spec, x0));
  const auto& resident = state.groups()[*state.find(x0)];
  const double v = resident.markers[static_cast<std::size_t>(rng.demography.index(resident.count()))];
  inject_mutant(state, y, v);

  RunOptions opt;
  opt.stop_when = [y](const PopulationState& s) { return !s.find(y).has_value(); };
  run_until(state, t_K, rng, opt);

  FixationTrialResult r;
  r.t_K_used = t_K;
  r.seed = seed;
  if (const auto g = state.find(y)) {
    const auto& group = state.groups()[*g];
    r.mutant_mass_at_tK = static_cast<double>(group.count()) / spec.K;
    r.survived_at_tK = r.mutant_mass_at_tK > epsilon;
    r.marker_max_atom_at_tK = bottleneck_metric(marker_distribution(state, y));
  }
  r.fixation_completed = r.survived_at_tK && !state.find(x0).has_value();
  return r;
}

/// Monte-Carlo estimate of the survival probability of a single mutant y in a
/// resident population x0 at equilibrium. Trial i uses stream_seed(seed, i).
inline FixationReport fixation_experiment(const ModelSpec& spec, double x0, double y,
                                          std::size_t trials, std::uint64_t seed,
                                          const FixationOptions& opt = {}) {
  const double f = invasion_fitness(spec, y, x0);
  if (!(f > 0.0))
    throw Error(Errc::NonPositiveFitness, "fixation_experiment needs f(y; x0) > 0");
  FixationReport report;
  report.oracle = f / spec.ecology.b(y);
  report.t_K = opt.t_K.value_or(default_t_K(spec.K));
  report.epsilon = opt.epsilon.value_or(0.1 * equilibrium_mass(spec, y) / 2.0);
  report.trials.resize(trials);
  parallel_for(trials, opt.threads, [&](std::size_t i) {
    report.trials[i] = fixation_trial(spec, x0, y, report.t_K, report.epsilon,
                                      opt.resident_marker, stream_seed(seed, i));
  });
  std::size_t survived = 0, fixed = 0, sharp = 0;
  for (const auto& t : report.trials) {
    survived += t.survived_at_tK;
    fixed += t.fixation_completed;
    sharp += t.survived_at_tK && t.marker_max_atom_at_tK >= opt.bottleneck_threshold;
  }
  report.survival = proportion(survived, trials);
  report.fixation = proportion(fixed, trials);
  report.bottleneck = proportion(sharp, survived);
  return report;
}

struct WfComparison {
  std::vector<double> ibm_terminal;  // allele-a frequency at real time K * horizon
  std::vector<double> wf_terminal;   // W_a at time horizon
  MeanStats ibm;
  MeanStats wf;
  double ks = 0.0;
  double pooled_se = 0.0;  // sqrt(se_ibm^2 + se_wf^2)
  std::size_t ibm_extinct = 0;
};

struct WfCompareOptions {
  double wf_dt = 1e-4;
  unsigned threads = 1;
};

/// Shared inputs of one IBM-versus-diffusion comparison.
struct WfCompareSetup {
  std::shared_ptr<const ModelSpec> spec;  // trait mutations switched off
  double trait = 0.0;
  double w0 = 0.0;
  double horizon = 0.0;
  double wf_dt = 1e-4;
  WfParams params;
  std::size_t individuals = 0;  // round(n_x K)
  std::size_t allele_a = 0;     // round(w0 individuals)
};

inline WfCompareSetup wf_compare_setup(ModelSpec spec, double x, double w0, double horizon,
                                       double wf_dt = 1e-4) {
  if (!spec.mutation.two_allele())
    throw Error(Errc::InvalidArgument, "compare_ibm_to_wf needs the two-allele marker kernel");
  if (!(w0 >= 0.0 && w0 <= 1.0)) throw Error(Errc::InvalidArgument, "w0 must lie in [0, 1]");
  spec.mutation.p_K = 0.0;
  WfCompareSetup s;
  s.params = wf_params(spec, x);
  s.individuals = static_cast<std::size_t>(std::llround(equilibrium_mass(spec, x) * spec.K));
  s.allele_a = static_cast<std::size_t>(std::llround(w0 * static_cast<double>(s.individuals)));
  s.spec = std::make_shared<const ModelSpec>(std::move(spec));
  s.trait = x;
  s.w0 = w0;
  s.horizon = horizon;
  s.wf_dt = wf_dt;
  return s;
}

struct WfPair {
  std::optional<double> ibm;  // empty when the IBM population died out
  double wf = 0.0;
};

/// One IBM path to real time K * horizon and one diffusion path to `horizon`.
inline WfPair wf_compare_replicate(const WfCompareSetup& s, std::uint64_t ibm_seed,
                                   std::uint64_t wf_seed) {
  WfPair out;
  IbmStreams rng(ibm_seed);
  PopulationState state(s.spec);
  for (std::size_t j = 0; j < s.individuals; ++j) state.add(s.trait, j < s.allele_a ? 0.0 : 1.0);
  run_until(state, s.horizon * s.spec->K, rng);
  if (const auto g = state.find(s.trait)) {
    const auto& group = state.groups()[*g];
    std::size_t a = 0;
    for (const double u : group.markers) a += (u == 0.0);
    out.ibm = static_cast<double>(a) / static_cast<double>(group.count());
  }
  Rng wf_rng(wf_seed);
  out.wf = wf_advance(WfState{0.0, s.trait, s.w0}, s.params, s.horizon, s.wf_dt, wf_rng).w_a;
  return out;
}

inline WfComparison summarize_comparison(const std::vector<WfPair>& pairs) {
  WfComparison out;
  for (const auto& p : pairs) {
    if (p.ibm) out.ibm_terminal.push_back(*p.ibm);
    else ++out.ibm_extinct;
    out.wf_terminal.push_back(p.wf);
  }
  out.ibm = mean_stats(out.ibm_terminal);
  out.wf = mean_stats(out.wf_terminal);
  out.pooled_se = std::sqrt(out.ibm.standard_error * out.ibm.standard_error +
                            out.wf.standard_error * out.wf.standard_error);
  if (!out.ibm_terminal.empty() && !out.wf_terminal.empty())
    out.ks = ks_distance(out.ibm_terminal, out.wf_terminal);
  return out;
}

/// Terminal allele frequencies of the two-allele IBM (trait mutations off)
/// against the Wright-Fisher diffusion started from the same frequency w0.
/// Replicate i uses stream_seed(seed, i) for the IBM and
/// stream_seed(seed, replicates + i) for the diffusion.
inline WfComparison compare_ibm_to_wf(const ModelSpec& spec, double x, double w0, double horizon,
                                      std::size_t replicates, std::uint64_t seed,
                                      const WfCompareOptions& opt = {}) {
  const WfCompareSetup setup = wf_compare_setup(spec, x, w0, horizon, opt.wf_dt);
  std::vector<WfPair> pairs(replicates);
  parallel_for(replicates, opt.threads, [&](std::size_t i) {
    pairs[i] = wf_compare_replicate(setup, stream_seed(seed, i), stream_seed(seed, replicates + i));
  });
  return summarize_comparison(pairs);
}

}  // namespace ecoevo
