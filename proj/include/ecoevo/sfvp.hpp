#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "ecoevo/analytic.hpp"
#include "ecoevo/csv.hpp"
#include "ecoevo/error.hpp"
#include "ecoevo/fleming_viot.hpp"
#include "ecoevo/model.hpp"
#include "ecoevo/rng.hpp"
#include "ecoevo/tss.hpp"
#include "ecoevo/wright_fisher.hpp"

namespace ecoevo {

/// One line of a limit-process trajectory export.
struct TrajectoryRow {
  double time = 0.0;
  double trait = 0.0;
  double n_hat = 0.0;
  double marker_mean = 0.0;
  double marker_var = 0.0;
  double marker_heterozygosity = 0.0;
  bool jump = false;
};

inline constexpr int kTrajectoryVersion = 1;

inline std::string trajectory_header() {
  return csv::schema_line("ecoevo-trajectory", kTrajectoryVersion) +
         "time,trait,n_hat,marker_mean,marker_var,marker_heterozygosity,jump_flag\n";
}

inline std::string trajectory_row(const TrajectoryRow& r) {
  return fmt::format("{},{},{},{},{},{},{}\n", csv::num(r.time), csv::num(r.trait),
                     csv::num(r.n_hat), csv::num(r.marker_mean), csv::num(r.marker_var),
                     csv::num(r.marker_heterozygosity), r.jump ? 1 : 0);
}

inline constexpr int kCloudVersion = 1;

inline std::string cloud_header() {
  return csv::schema_line("ecoevo-cloud", kCloudVersion) + "time,trait,marker,weight\n";
}

/// Empirical marker law of a particle cloud, one row per atom.
inline std::string cloud_rows(double time, double trait, const std::vector<MarkerAtom>& atoms) {
  std::string out;
  for (const auto& a : atoms)
    out += fmt::format("{},{},{},{}\n", csv::num(time), csv::num(trait), csv::num(a.value),
                       csv::num(a.weight));
  return out;
}

inline TrajectoryRow summarize(const FvParticleSystem& fv, bool jump = false) {
  return {fv.time, fv.trait(), fv.n_hat(), fv.mean(), fv.variance(), fv.heterozygosity(), jump};
}

/// Alleles a = 0, A = 1, so the marker mean is the frequency of A.
inline TrajectoryRow summarize(const WfState& wf, double n_hat, bool jump = false) {
  const double w = wf.w_a;
  return {wf.time, wf.trait, n_hat, 1.0 - w, w * (1.0 - w), 2.0 * w * (1.0 - w), jump};
}

struct SfvpOptions {
  std::size_t particles = 1000;
  double mutation_thinning = kDefaultMutationThinning;
  double wf_dt = 1e-4;
  double sampling_interval = 0.0;  // <= 0 records only the start, the jumps and the end
};

/// Macroscopic state n_Y delta_Y F(Y, dv). In two-allele mode the marker law is
/// the allele-a frequency of the Wright-Fisher diffusion; otherwise a Moran cloud.
struct SfvpState {
  double time = 0.0;
  double trait = 0.0;
  double n_hat = 0.0;
  std::variant<FvParticleSystem, WfState> marker_law;

  bool two_allele() const { return std::holds_alternative<WfState>(marker_law); }
  double w_a() const { return std::get<WfState>(marker_law).w_a; }
  const FvParticleSystem& cloud() const { return std::get<FvParticleSystem>(marker_law); }

  TrajectoryRow summary(bool jump = false) const {
    TrajectoryRow r = two_allele() ? summarize(std::get<WfState>(marker_law), n_hat, jump)
                                   : summarize(cloud(), jump);
    r.time = time;
    return r;
  }
};

/// Starts from n_{x0} delta_{(x0, u0)}; the initial marker law is a Dirac mass.
inline SfvpState sfvp_init(const ModelSpec& spec, double x0, double u0,
                           const SfvpOptions& opt = {}) {
  const Equilibrium eq = equilibrium(spec.ecology, x0);
  if (!eq.viable) throw Error(Errc::InvalidArgument, "sfvp: initial trait is not viable");
  if (!spec.marker_space.contains(u0)) throw Error(Errc::OutOfSpace, "sfvp: u0");
  if (spec.mutation.two_allele()) {
    return {0.0, x0, eq.mass, WfState{0.0, x0, u0 == 0.0 ? 1.0 : 0.0}};
  }
  return {0.0, x0, eq.mass,
          FvParticleSystem::dirac(x0, eq.mass, fv_params(spec, x0, opt.mutation_thinning),
                                  opt.particles, u0)};
}

/// Evolves the marker law at the current trait up to time t.
inline void sfvp_advance(SfvpState& s, const ModelSpec& spec, double t, const SfvpOptions& opt,
                         Rng& rng) {
  if (t <= s.time) return;
  if (s.two_allele()) {
    auto& wf = std::get<WfState>(s.marker_law);
    wf = wf_advance(wf, wf_params(spec, s.trait), t, opt.wf_dt, rng);
  } else {
    std::get<FvParticleSystem>(s.marker_law).advance_to(t, rng);
  }
  s.time = t;
}

/// Applies an accepted trait jump to `new_trait`: the founding mutant's marker
/// v is drawn from the current marker law, and the whole law collapses onto
/// it. Two-allele mode moves (W_a, 1 - W_a) to (1, 0) with probability W_a.
/// Returns v.
inline double sfvp_jump(SfvpState& s, const ModelSpec& spec, double new_trait, Rng& rng,
                        const SfvpOptions& opt = {}) {
  const Equilibrium eq = equilibrium(spec.ecology, new_trait);
  if (!eq.viable) throw Error(Errc::InvalidArgument, "sfvp: jump to a nonviable trait");
  double v = 0.0;
  if (s.two_allele()) {
    auto& wf = std::get<WfState>(s.marker_law);
    v = rng.uniform() < wf.w_a ? 0.0 : 1.0;
    wf.w_a = (v == 0.0) ? 1.0 : 0.0;
    wf.trait = new_trait;
  } else {
    auto& fv = std::get<FvParticleSystem>(s.marker_law);
    v = fv.particles()[static_cast<std::size_t>(rng.index(fv.size()))];
    fv.reset_to(v);
    fv.retarget(new_trait, eq.mass, fv_params(spec, new_trait, opt.mutation_thinning));
  }
  s.trait = new_trait;
  s.n_hat = eq.mass;
  return v;
}

enum class SfvpStatus { Completed, NonViable };

struct SfvpResult {
  SfvpStatus status = SfvpStatus::Completed;
  std::size_t jumps = 0;
  std::vector<TrajectoryRow> rows;
  std::optional<SfvpState> final_state;
};

using SfvpRecorder = std::function<void(const TrajectoryRow&, const SfvpState&)>;

/// Substitution Fleming-Viot process on [0, horizon] in trait-mutation time.
/// Trait jumps follow the thinning construction of tss_next_jump; between
/// them the marker law evolves at the current trait.
inline SfvpResult sfvp_run(const ModelSpec& spec, double x0, double u0, double horizon, Rng& rng,
                           const SfvpOptions& opt = {},
                           const SfvpRecorder& recorder = {}) {
  SfvpResult out;
  SfvpState s = sfvp_init(spec, x0, u0, opt);
  auto emit = [&](const TrajectoryRow& r) {
    out.rows.push_back(r);
    if (recorder) recorder(r, s);
  };
  emit(s.summary());
  const bool sampling = opt.sampling_interval > 0.0;
  std::size_t sample_index = 1;
  auto next_sample = [&] {
    return sampling ? static_cast<double>(sample_index) * opt.sampling_interval
                    : std::numeric_limits<double>::infinity();
  };
  while (s.time < horizon) {
    const double envelope = spec.ecology.b(s.trait) * s.n_hat;
    const double proposal = envelope > 0.0 ? s.time + rng.exponential(envelope)
                                           : std::numeric_limits<double>::infinity();
    const double target = std::min(proposal, horizon);
    while (next_sample() <= target) {
      sfvp_advance(s, spec, next_sample(), opt, rng);
      emit(s.summary());
      ++sample_index;
    }
    sfvp_advance(s, spec, target, opt, rng);
    if (proposal > horizon) break;
    const double y = spec.sample_trait_mutant(rng, s.trait);
    if (!(rng.uniform() < jump_acceptance(spec, s.trait, y))) continue;
    if (!equilibrium(spec.ecology, y).viable) {
      out.status = SfvpStatus::NonViable;
      break;
    }
    sfvp_jump(s, spec, y, rng, opt);
    ++out.jumps;
    emit(s.summary(true));
  }
  if (out.rows.back().time != s.time || out.rows.back().jump) emit(s.summary());
  out.final_state = std::move(s);
  return out;
}

}  // namespace ecoevo
