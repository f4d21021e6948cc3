#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecoevo/analytic.hpp"
#include "ecoevo/error.hpp"
#include "ecoevo/model.hpp"
#include "ecoevo/rng.hpp"

namespace ecoevo {

inline constexpr double kAtomMergeTolerance = 1e-12;

struct MarkerAtom {
  double value = 0.0;
  double weight = 0.0;  // multiplicity, or probability once normalized
  bool operator==(const MarkerAtom&) const = default;
};

/// Collapses a list of marker values into sorted atoms with multiplicities.
/// Values closer than kAtomMergeTolerance to the current atom are merged into it.
inline std::vector<MarkerAtom> collect_atoms(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::vector<MarkerAtom> atoms;
  for (const double v : values) {
    if (!atoms.empty() && v - atoms.back().value <= kAtomMergeTolerance) {
      atoms.back().weight += 1.0;
    } else {
      atoms.push_back({v, 1.0});
    }
  }
  return atoms;
}

/// All individuals sharing one trait value. Individuals are stored as a flat
/// list of their markers so that a uniformly chosen individual costs O(1).
struct TraitGroup {
  double trait = 0.0;
  std::vector<double> markers;
  double birth = 0.0;    // b(trait)
  double death = 0.0;    // d(trait)
  double eta = 0.0;      // eta(trait)
  std::vector<double> comp_row;  // C(trait - other.trait), in group order
  double pressure = 0.0;         // sum_h C(trait - trait_h) count_h

  std::size_t count() const { return markers.size(); }
  double cached_birth_rate() const { return birth * static_cast<double>(count()); }
  double cached_death_base() const { return death * static_cast<double>(count()); }
  double competition_rate(int K) const {
    return eta * static_cast<double>(count()) * pressure / K;
  }
  double total_rate(int K) const {
    return cached_birth_rate() + cached_death_base() + competition_rate(K);
  }
  std::vector<MarkerAtom> marker_atoms() const { return collect_atoms(markers); }
};

/// Rescaled point measure nu^K: every individual carries mass 1/K.
class PopulationState {
 public:
  explicit PopulationState(std::shared_ptr<const ModelSpec> spec) : spec_(std::move(spec)) {}
  explicit PopulationState(const ModelSpec& spec)
      : spec_(std::make_shared<const ModelSpec>(spec)) {}

  double time = 0.0;

  const ModelSpec& spec() const { return *spec_; }
  std::shared_ptr<const ModelSpec> spec_ptr() const { return spec_; }
  int K() const { return spec_->K; }
  std::span<const TraitGroup> groups() const { return groups_; }
  std::size_t total_count() const { return total_; }
  double mass() const { return static_cast<double>(total_) / K(); }
  bool empty() const { return total_ == 0; }

  std::optional<std::size_t> find(double trait) const {
    for (std::size_t g = 0; g < groups_.size(); ++g)
      if (groups_[g].trait == trait) return g;
    return std::nullopt;
  }

  /// Adds one individual, creating its trait group if needed. Returns the group index.
  std::size_t add(double trait, double marker) {
    if (!spec_->trait_space.contains(trait))
      throw Error(Errc::OutOfSpace, "trait " + std::to_string(trait) + " outside the trait space");
    if (!spec_->marker_space.contains(marker))
      throw Error(Errc::OutOfSpace,
                  "marker " + std::to_string(marker) + " outside the marker space");
    std::size_t g = 0;
    if (auto found = find(trait)) {
      g = *found;
    } else {
      g = groups_.size();
      TraitGroup group;
      group.trait = trait;
      group.birth = spec_->ecology.b(trait);
      group.death = spec_->ecology.d(trait);
      group.eta = spec_->ecology.eta(trait);
      groups_.push_back(std::move(group));
      rebuild_competition();
    }
    groups_[g].markers.push_back(marker);
    ++total_;
    shift_pressure(g, +1.0);
    return g;
  }

  /// Removes individual `i` of group `g`; the group disappears when emptied.
  void remove(std::size_t g, std::size_t i) {
    auto& m = groups_[g].markers;
    m[i] = m.back();
    m.pop_back();
    --total_;
    if (m.empty()) {
      groups_.erase(groups_.begin() + static_cast<std::ptrdiff_t>(g));
      rebuild_competition();
    } else {
      shift_pressure(g, -1.0);
    }
  }

  double total_event_rate() const {
    double total = 0.0;
    for (const auto& g : groups_) total += g.total_rate(K());
    return total;
  }

  /// Largest relative deviation between cached and from-scratch rates.
  double cache_error() const {
    double worst = 0.0;
    auto rel = [](double cached, double exact) {
      const double scale = std::max(std::abs(exact), 1e-300);
      return std::abs(cached - exact) / scale;
    };
    const auto& e = spec_->ecology;
    for (const auto& g : groups_) {
      double exact = 0.0;
      for (const auto& h : groups_) exact += e.C(g.trait - h.trait) * static_cast<double>(h.count());
      worst = std::max(worst, rel(g.pressure, exact));
      worst = std::max(worst, rel(g.cached_birth_rate(), e.b(g.trait) * g.count()));
      worst = std::max(worst, rel(g.cached_death_base(), e.d(g.trait) * g.count()));
    }
    return worst;
  }

 private:
  void rebuild_competition() {
    const auto& e = spec_->ecology;
    for (auto& g : groups_) {
      g.comp_row.resize(groups_.size());
      g.pressure = 0.0;
      for (std::size_t h = 0; h < groups_.size(); ++h) {
        g.comp_row[h] = e.C(g.trait - groups_[h].trait);
        g.pressure += g.comp_row[h] * static_cast<double>(groups_[h].count());
      }
    }
  }

  void shift_pressure(std::size_t h, double delta) {
    for (auto& g : groups_) g.pressure += delta * g.comp_row[h];
  }

  std::shared_ptr<const ModelSpec> spec_;
  std::vector<TraitGroup> groups_;
  std::size_t total_ = 0;
};

/// round(n0 K) individuals at (x0, u0), time 0.
inline PopulationState init_monomorphic(const ModelSpec& spec, double x0, double u0, double n0) {
  if (n0 < 0.0) throw Error(Errc::InvalidArgument, "init_monomorphic: n0 must be >= 0");
  if (!spec.trait_space.contains(x0)) throw Error(Errc::OutOfSpace, "init_monomorphic: x0");
  if (!spec.marker_space.contains(u0)) throw Error(Errc::OutOfSpace, "init_monomorphic: u0");
  PopulationState state(spec);
  const auto n = static_cast<std::size_t>(std::llround(n0 * spec.K));
  for (std::size_t i = 0; i < n; ++i) state.add(x0, u0);
  return state;
}

inline double total_event_rate(const PopulationState& state) { return state.total_event_rate(); }

/// Adds one individual (y, v).
inline void inject_mutant(PopulationState& state, double y, double v) { state.add(y, v); }

/// Normalized marker law pi^K(x, du) of the individuals carrying trait x.
inline std::vector<MarkerAtom> marker_distribution(const PopulationState& state, double x) {
  const auto g = state.find(x);
  if (!g) throw Error(Errc::UnknownTrait, "no individual carries trait " + std::to_string(x));
  const auto& group = state.groups()[*g];
  auto atoms = group.marker_atoms();
  const double n = static_cast<double>(group.count());
  for (auto& a : atoms) a.weight /= n;
  return atoms;
}

enum class EventKind {
  Birth,
  BirthTraitMutation,
  BirthMarkerMutation,
  BirthDoubleMutation,
  NaturalDeath,
  CompetitionDeath,
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Birth: return "Birth";
    case EventKind::BirthTraitMutation: return "BirthTraitMutation";
    case EventKind::BirthMarkerMutation: return "BirthMarkerMutation";
    case EventKind::BirthDoubleMutation: return "BirthDoubleMutation";
    case EventKind::NaturalDeath: return "NaturalDeath";
    case EventKind::CompetitionDeath: return "CompetitionDeath";
  }
  return "?";
}

inline bool is_birth(EventKind k) {
  return k != EventKind::NaturalDeath && k != EventKind::CompetitionDeath;
}

struct EventRecord {
  double time = 0.0;
  EventKind kind = EventKind::Birth;
  double parent_trait = 0.0;
  double parent_marker = 0.0;
  double child_trait = std::numeric_limits<double>::quiet_NaN();  // NaN for deaths
  double child_marker = std::numeric_limits<double>::quiet_NaN();

  bool operator==(const EventRecord& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return time == o.time && kind == o.kind && parent_trait == o.parent_trait &&
           parent_marker == o.parent_marker && same(child_trait, o.child_trait) &&
           same(child_marker, o.child_marker);
  }
};

/// The engine's two random streams. Every draw whose count could depend on the
/// marker model (marker displacements) comes from `marker`; everything else,
/// including the q_K coin, comes from `demography`. The trait-level event
/// sequence is therefore the same for any marker kernel with the same q_K.
struct IbmStreams {
  explicit IbmStreams(std::uint64_t seed)
      : demography(substream_seed(seed, Substream::Demography)),
        marker(substream_seed(seed, Substream::Marker)) {}
  Rng demography;
  Rng marker;
};

namespace detail {

inline EventRecord apply_event(PopulationState& state, IbmStreams& rng, double total) {
  const ModelSpec& spec = state.spec();
  const int K = state.K();
  double pick = rng.demography.uniform() * total;
  const auto groups = state.groups();
  std::size_t g = groups.size() - 1;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double r = groups[i].total_rate(K);
    if (pick < r) {
      g = i;
      break;
    }
    pick -= r;
  }
  const TraitGroup& group = groups[g];
  const double birth = group.cached_birth_rate();
  const double natural = group.cached_death_base();
  const auto who = static_cast<std::size_t>(rng.demography.index(group.count()));

  EventRecord ev;
  ev.time = state.time;
  ev.parent_trait = group.trait;
  ev.parent_marker = group.markers[who];

  if (pick < birth) {
    const bool trait_mut = rng.demography.bernoulli(spec.mutation.p_K);
    const bool marker_mut = rng.demography.bernoulli(spec.mutation.q_K);
    ev.child_trait = trait_mut ? spec.sample_trait_mutant(rng.demography, ev.parent_trait)
                               : ev.parent_trait;
    ev.child_marker = marker_mut ? spec.sample_marker_mutant(rng.marker, ev.parent_marker)
                                 : ev.parent_marker;
    ev.kind = trait_mut ? (marker_mut ? EventKind::BirthDoubleMutation
                                      : EventKind::BirthTraitMutation)
                        : (marker_mut ? EventKind::BirthMarkerMutation : EventKind::Birth);
    state.add(ev.child_trait, ev.child_marker);
  } else {
    ev.kind = (pick < birth + natural) ? EventKind::NaturalDeath : EventKind::CompetitionDeath;
    state.remove(g, who);
  }
  return ev;
}

}  // namespace detail

/// Advances to the next event if it happens no later than `t_limit`. Otherwise
/// the clock is set to `t_limit` and nothing else changes, which leaves the law
/// of the process unchanged because waiting times are memoryless.
inline std::optional<EventRecord> step_within(PopulationState& state, IbmStreams& rng,
                                              double t_limit) {
  const double total = state.total_event_rate();
  if (!(total > 0.0)) throw Error(Errc::ExtinctPopulation, "total event rate is zero");
  const double wait = rng.demography.exponential(total);
  if (state.time + wait > t_limit) {
    state.time = t_limit;
    return std::nullopt;
  }
  state.time += wait;
  return detail::apply_event(state, rng, total);
}

/// One exact jump of the microscopic process.
inline EventRecord step(PopulationState& state, IbmStreams& rng) {
  return *step_within(state, rng, std::numeric_limits<double>::infinity());
}

enum class RunStatus { Completed, Extinct };

struct RunResult {
  RunStatus status = RunStatus::Completed;
  std::uint64_t events = 0;
};

struct RunOptions {
  double sampling_interval = 0.0;  // <= 0 disables the recorder
  std::function<void(const PopulationState&)> recorder;
  std::function<void(const EventRecord&)> on_event;
  /// Returning true ends the run early (status Completed, clock at the event).
  std::function<bool(const PopulationState&)> stop_when;
};

/// Runs to `t_end`, sampling the recorder at state.time + k * interval. An
/// extinct population is a terminal status, not an error; its clock is moved
/// to `t_end` and the remaining samples record the empty state.
inline RunResult run_until(PopulationState& state, double t_end, IbmStreams& rng,
                           const RunOptions& opt = {}) {
  if (t_end < state.time) throw Error(Errc::InvalidArgument, "run_until: t_end < current time");
  RunResult result;
  const bool sampling = opt.sampling_interval > 0.0 && opt.recorder;
  const double t0 = state.time;
  std::uint64_t sample_index = 0;
  auto next_sample = [&] {
    return sampling ? t0 + static_cast<double>(sample_index) * opt.sampling_interval
                    : std::numeric_limits<double>::infinity();
  };
  auto flush_samples = [&](double upto) {
    while (sampling && next_sample() <= upto) {
      const double keep = state.time;
      state.time = next_sample();
      opt.recorder(state);
      state.time = keep;
      ++sample_index;
    }
  };
  flush_samples(state.time);
  while (state.time < t_end) {
    if (state.empty()) {
      result.status = RunStatus::Extinct;
      flush_samples(t_end);
      state.time = t_end;
      return result;
    }
    const double limit = std::min(t_end, next_sample());
    const auto ev = step_within(state, rng, limit);
    if (!ev) {
      flush_samples(state.time);
      continue;
    }
    ++result.events;
    if (opt.on_event) opt.on_event(*ev);
    if (opt.stop_when && opt.stop_when(state)) return result;
  }
  if (state.empty()) result.status = RunStatus::Extinct;
  return result;
}

/// Integrand of the drift term of <nu^K, phi>:
///   \int (B^K - D^K(X^K)) phi dnu^K.
/// Expectations over the two-allele kernel are exact; over continuous kernels
/// they use `samples` Monte-Carlo draws from a stream seeded by `seed`.
inline double generator_drift(const PopulationState& state,
                              const std::function<double(double, double)>& phi,
                              std::size_t samples = 100000, std::uint64_t seed = 0x5EED) {
  const ModelSpec& spec = state.spec();
  const auto& e = spec.ecology;
  const double p = spec.mutation.p_K;
  const double q = spec.mutation.q_K;
  const int K = state.K();
  Rng rng(substream_seed(seed, Substream::Oracle));

  double drift = 0.0;
  for (const auto& group : state.groups()) {
    const double x = group.trait;
    double conv = 0.0;  // C * nu(x)
    for (const auto& h : state.groups()) conv += e.C(x - h.trait) * h.count();
    conv /= K;
    const double death = e.d(x) + e.eta(x) * conv;
    const double b = e.b(x);

    std::vector<double> trait_draws;
    if (p > 0.0) {
      trait_draws.resize(samples);
      for (auto& k : trait_draws) k = spec.sample_trait_mutant(rng, x);
    }

    for (const auto& atom : group.marker_atoms()) {
      const double u = atom.value;
      const double w = atom.weight / K;
      double birth_term = (1 - p) * (1 - q) * phi(x, u);

      if (spec.mutation.two_allele()) {
        const auto& k = std::get<TwoAllele>(spec.mutation.marker_kernel);
        const double flip = (u == 0.0) ? k.q_a : k.q_A;
        auto marker_mean = [&](const auto& f) { return (1 - flip) * f(u) + flip * f(1.0 - u); };
        if (q > 0.0)
          birth_term += q * (1 - p) * marker_mean([&](double v) { return phi(x, v); });
        if (p > 0.0) {
          double trait_only = 0.0, both = 0.0;
          for (const double y : trait_draws) {
            trait_only += phi(y, u);
            both += marker_mean([&](double v) { return phi(y, v); });
          }
          birth_term += p * (1 - q) * trait_only / samples;
          birth_term += p * q * both / samples;
        }
      } else {
        if (q > 0.0) {
          double marker_only = 0.0;
          std::vector<double> marker_draws(samples);
          for (auto& v : marker_draws) {
            v = spec.sample_marker_mutant(rng, u);
            marker_only += phi(x, v);
          }
          birth_term += q * (1 - p) * marker_only / samples;
          if (p > 0.0) {
            double both = 0.0;
            for (std::size_t i = 0; i < samples; ++i) both += phi(trait_draws[i], marker_draws[i]);
            birth_term += p * q * both / samples;
          }
        }
        if (p > 0.0) {
          double trait_only = 0.0;
          for (const double y : trait_draws) trait_only += phi(y, u);
          birth_term += p * (1 - q) * trait_only / samples;
        }
      }
      drift += w * (b * birth_term - death * phi(x, u));
    }
  }
  return drift;
}

/// <nu, phi> = (1/K) sum_i phi(x_i, u_i).
inline double integrate(const PopulationState& state,
                        const std::function<double(double, double)>& phi) {
  double s = 0.0;
  for (const auto& g : state.groups())
    for (const double u : g.markers) s += phi(g.trait, u);
  return s / state.K();
}

}  // namespace ecoevo
