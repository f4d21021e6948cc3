#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <openssl/evp.h>

#include "ecoevo/analytic.hpp"
#include "ecoevo/csv.hpp"
#include "ecoevo/dimorphic.hpp"
#include "ecoevo/error.hpp"
#include "ecoevo/experiments.hpp"
#include "ecoevo/fleming_viot.hpp"
#include "ecoevo/harness/config.hpp"
#include "ecoevo/ibm.hpp"
#include "ecoevo/ibm_io.hpp"
#include "ecoevo/parallel.hpp"
#include "ecoevo/rng.hpp"
#include "ecoevo/sfvp.hpp"
#include "ecoevo/stats.hpp"
#include "ecoevo/tss.hpp"
#include "ecoevo/wright_fisher.hpp"

namespace ecoevo {

inline constexpr std::string_view kToolVersion = "0.1.0";

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(Errc::InvalidArgument, "SHA-256 computation failed");
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

enum class ReplicateStatus { Ok, Extinct, NonViable, Failed };

inline std::string_view to_string(ReplicateStatus s) {
  switch (s) {
    case ReplicateStatus::Ok: return "ok";
    case ReplicateStatus::Extinct: return "extinct";
    case ReplicateStatus::NonViable: return "nonviable";
    case ReplicateStatus::Failed: return "failed";
  }
  return "?";
}

struct OutputFile {
  std::string name;
  std::string content;
};

struct ReplicateRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  ReplicateStatus status = ReplicateStatus::Ok;
  std::string error;
};

struct ManifestFile {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::size_t bytes = 0;
};

struct RunManifest {
  json config;
  std::string version{kToolVersion};
  std::string started_at;
  double wall_clock_seconds = 0.0;
  std::vector<ReplicateRecord> replicates;
  std::vector<ManifestFile> files;

  std::size_t failed() const {
    std::size_t n = 0;
    for (const auto& r : replicates) n += r.status == ReplicateStatus::Failed;
    return n;
  }
  bool all_failed() const { return !replicates.empty() && failed() == replicates.size(); }

  json to_json() const {
    json reps = json::array();
    for (const auto& r : replicates) {
      json e = {{"index", r.index}, {"seed", r.seed}, {"status", std::string(to_string(r.status))}};
      if (!r.error.empty()) e["error"] = r.error;
      reps.push_back(e);
    }
    json files_json = json::array();
    for (const auto& f : files)
      files_json.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    return {{"tool", "ecoevo"},
            {"version", version},
            {"config", config},
            {"started_at", started_at},
            {"wall_clock_seconds", wall_clock_seconds},
            {"replicates", reps},
            {"files", files_json}};
  }
};

inline constexpr std::string_view kManifestName = "manifest.json";

namespace detail {

struct ReplicateOutput {
  ReplicateStatus status = ReplicateStatus::Ok;
  std::string error;
  std::vector<OutputFile> files;
  std::optional<FixationTrialResult> trial;  // invasion mode
  std::optional<WfPair> pair;                // compare-wf mode
};

inline std::string replicate_file(std::size_t i, std::string_view kind) {
  return fmt::format("replicate_{:04}_{}.csv", i, kind);
}

/// Config echo for reports: everything that determines the results.
inline json result_echo(const ExperimentConfig& c) {
  json j = config_to_json(c);
  j.erase("threads");
  j.erase("output_dir");
  return j;
}

inline double initial_mass(const ExperimentConfig& c) {
  return c.initial.mass.value_or(equilibrium_mass(c.model, c.initial.trait));
}

/// Initial individuals (ibm) or particles (fv): all at the initial marker, or
/// a leading block of allele a followed by allele A.
inline std::vector<double> initial_markers(const ExperimentConfig& c, std::size_t n) {
  if (!c.initial.allele_a_frequency) return std::vector<double>(n, c.initial.marker);
  const auto a = static_cast<std::size_t>(
      std::llround(*c.initial.allele_a_frequency * static_cast<double>(n)));
  std::vector<double> out(n, 1.0);
  std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(a), 0.0);
  return out;
}

inline double initial_w_a(const ExperimentConfig& c) {
  return c.initial.allele_a_frequency.value_or(c.initial.marker == 0.0 ? 1.0 : 0.0);
}

/// Sample times k * interval in (0, horizon); the end point is added separately.
template <class Fn>
void for_each_sample(double interval, double horizon, Fn&& fn) {
  if (!(interval > 0.0)) return;
  for (std::size_t k = 1; static_cast<double>(k) * interval < horizon; ++k)
    fn(static_cast<double>(k) * interval);
}

inline ReplicateOutput run_ibm(const ExperimentConfig& c, const std::shared_ptr<const ModelSpec>& spec,
                               std::size_t i, std::uint64_t seed) {
  ReplicateOutput out;
  PopulationState state(spec);
  const auto n = static_cast<std::size_t>(std::llround(initial_mass(c) * c.K));
  for (const double u : initial_markers(c, n)) state.add(c.initial.trait, u);
  IbmStreams rng(seed);
  std::string snapshots = snapshot_header();
  std::string events = event_log_header();
  std::optional<double> last_sample;
  auto sample = [&](const PopulationState& s) {
    snapshots += snapshot_rows(s);
    last_sample = s.time;
  };
  RunOptions opt;
  opt.sampling_interval = c.sampling_interval;
  opt.recorder = sample;
  if (c.options.event_log) opt.on_event = [&](const EventRecord& ev) { events += event_log_row(ev); };
  if (!(c.sampling_interval > 0.0)) sample(state);
  const RunResult r = run_until(state, c.horizon, rng, opt);
  if (last_sample != state.time) sample(state);
  if (r.status == RunStatus::Extinct) out.status = ReplicateStatus::Extinct;
  out.files.push_back({replicate_file(i, "snapshots"), std::move(snapshots)});
  if (c.options.event_log) out.files.push_back({replicate_file(i, "events"), std::move(events)});
  return out;
}

inline ReplicateOutput run_tss(const ExperimentConfig& c, std::size_t i, std::uint64_t seed) {
  ReplicateOutput out;
  Rng rng(seed);
  const auto& spec = c.model;
  std::string rows = trajectory_header();
  auto emit = [&](const TssState& s, bool jump) {
    rows += trajectory_row({s.time, s.trait, equilibrium_mass(spec, s.trait), s.marker, 0.0, 0.0, jump});
  };
  TssState s{0.0, c.initial.trait, c.initial.marker};
  if (!equilibrium(spec.ecology, s.trait).viable) throw Error(Errc::InvalidArgument, "initial trait is not viable");
  emit(s, false);
  while (true) {
    const TssJump j = tss_next_jump(spec, s, dirac_marker(s.marker), rng, c.horizon);
    s = j.state;
    if (j.censored) break;
    if (!equilibrium(spec.ecology, s.trait).viable) {
      out.status = ReplicateStatus::NonViable;
      break;
    }
    emit(s, true);
  }
  emit(s, false);
  out.files.push_back({replicate_file(i, "trajectory"), std::move(rows)});
  return out;
}

inline ReplicateOutput run_fv(const ExperimentConfig& c, std::size_t i, std::uint64_t seed) {
  ReplicateOutput out;
  const auto& spec = c.model;
  const double x = c.initial.trait;
  FvParticleSystem sys(x, equilibrium_mass(spec, x), fv_params(spec, x, c.options.mutation_thinning),
                       initial_markers(c, c.options.particles));
  Rng rng(seed);
  std::string rows = trajectory_header();
  std::string cloud = cloud_header();
  auto sample = [&] {
    rows += trajectory_row(summarize(sys));
    cloud += cloud_rows(sys.time, x, sys.atoms());
  };
  sample();
  for_each_sample(c.sampling_interval, c.horizon, [&](double t) {
    sys.advance_to(t, rng);
    sample();
  });
  sys.advance_to(c.horizon, rng);
  if (c.horizon > 0.0) sample();
  out.files.push_back({replicate_file(i, "trajectory"), std::move(rows)});
  out.files.push_back({replicate_file(i, "cloud"), std::move(cloud)});
  return out;
}

inline ReplicateOutput run_wf(const ExperimentConfig& c, std::size_t i, std::uint64_t seed) {
  ReplicateOutput out;
  const WfParams p = wf_params(c.model, c.initial.trait);
  WfState s{0.0, c.initial.trait, initial_w_a(c)};
  Rng rng(seed);
  std::string rows = trajectory_header();
  rows += trajectory_row(summarize(s, p.n_hat));
  for_each_sample(c.sampling_interval, c.horizon, [&](double t) {
    s = wf_advance(s, p, t, c.options.wf_dt, rng);
    rows += trajectory_row(summarize(s, p.n_hat));
  });
  s = wf_advance(s, p, c.horizon, c.options.wf_dt, rng);
  if (c.horizon > 0.0) rows += trajectory_row(summarize(s, p.n_hat));
  out.files.push_back({replicate_file(i, "trajectory"), std::move(rows)});
  return out;
}

inline ReplicateOutput run_sfvp(const ExperimentConfig& c, std::size_t i, std::uint64_t seed) {
  ReplicateOutput out;
  SfvpOptions opt;
  opt.particles = c.options.particles;
  opt.mutation_thinning = c.options.mutation_thinning;
  opt.wf_dt = c.options.wf_dt;
  opt.sampling_interval = c.sampling_interval;
  Rng rng(seed);
  std::string rows = trajectory_header();
  std::string cloud = cloud_header();
  const bool two_allele = c.model.mutation.two_allele();
  const double u0 = two_allele ? (initial_w_a(c) == 1.0 ? 0.0 : 1.0) : c.initial.marker;
  if (two_allele && c.initial.allele_a_frequency && *c.initial.allele_a_frequency != 0.0 &&
      *c.initial.allele_a_frequency != 1.0)
    throw Error(Errc::InvalidArgument, "sfvp starts from a Dirac marker law");
  const SfvpResult r = sfvp_run(c.model, c.initial.trait, u0, c.horizon, rng, opt,
                                [&](const TrajectoryRow& row, const SfvpState& s) {
                                  rows += trajectory_row(row);
                                  if (!s.two_allele())
                                    cloud += cloud_rows(row.time, s.trait, s.cloud().atoms());
                                });
  if (r.status == SfvpStatus::NonViable) out.status = ReplicateStatus::NonViable;
  out.files.push_back({replicate_file(i, "trajectory"), std::move(rows)});
  if (!two_allele) out.files.push_back({replicate_file(i, "cloud"), std::move(cloud)});
  return out;
}

inline ReplicateOutput run_dimorphic(const ExperimentConfig& c, std::size_t i, std::uint64_t seed) {
  ReplicateOutput out;
  const double x0 = c.initial.trait;
  const double y = c.mutant->trait;
  const double v = c.mutant->marker.value_or(c.initial.marker);
  std::string cloud = cloud_header();
  std::vector<std::string> clouds(2);
  DimorphicOptions opt;
  opt.mutation_thinning = c.options.mutation_thinning;
  opt.sampling_interval = c.sampling_interval;
  opt.on_sample = [&](int which, const FvParticleSystem& sys) {
    clouds[static_cast<std::size_t>(which)] += cloud_rows(sys.time, sys.trait(), sys.atoms());
  };
  const DimorphicResult r =
      dimorphic_fv_run(c.model, x0, y, initial_markers(c, c.options.particles),
                       std::vector<double>(c.options.particles, v), c.horizon, seed, opt);
  std::string rows = trajectory_header();
  for (const auto& row : r.first) rows += trajectory_row(row);
  for (const auto& row : r.second) rows += trajectory_row(row);
  out.files.push_back({replicate_file(i, "trajectory"), std::move(rows)});
  out.files.push_back({replicate_file(i, "cloud"), cloud + clouds[0] + clouds[1]});
  return out;
}

inline ReplicateOutput run_replicate(const ExperimentConfig& c,
                                     const std::shared_ptr<const ModelSpec>& spec,
                                     const std::optional<WfCompareSetup>& wf_setup, std::size_t i,
                                     std::uint64_t seed) {
  switch (c.mode) {
    case Mode::Ibm: return run_ibm(c, spec, i, seed);
    case Mode::Tss: return run_tss(c, i, seed);
    case Mode::Fv: return run_fv(c, i, seed);
    case Mode::Wf: return run_wf(c, i, seed);
    case Mode::Sfvp: return run_sfvp(c, i, seed);
    case Mode::DimorphicFv: return run_dimorphic(c, i, seed);
    case Mode::Invasion: {
      ReplicateOutput out;
      out.trial = fixation_trial(c.model, c.initial.trait, c.mutant->trait,
                                 c.options.t_K.value_or(default_t_K(c.K)),
                                 c.options.epsilon.value_or(
                                     0.1 * equilibrium_mass(c.model, c.mutant->trait) / 2.0),
                                 c.initial.marker, seed);
      return out;
    }
    case Mode::CompareWf: {
      ReplicateOutput out;
      out.pair = wf_compare_replicate(*wf_setup, seed, stream_seed(c.seed, c.replicates + i));
      if (!out.pair->ibm) out.status = ReplicateStatus::Extinct;
      return out;
    }
    case Mode::CheckIif: break;
  }
  throw Error(Errc::InvalidArgument, "mode has no replicates");
}

inline json stats_json(const SummaryStats& s) {
  return {{"estimate", s.estimate},
          {"standard_error", s.standard_error},
          {"wilson_ci_95", {s.wilson_ci_95.first, s.wilson_ci_95.second}},
          {"n_trials", s.n_trials}};
}

inline json mean_json(const MeanStats& s) {
  return {{"mean", s.mean}, {"variance", s.variance}, {"standard_error", s.standard_error}, {"n", s.n}};
}

inline std::vector<OutputFile> invasion_outputs(const ExperimentConfig& c,
                                                const std::vector<ReplicateOutput>& reps) {
  const double t_K = c.options.t_K.value_or(default_t_K(c.K));
  const double eps =
      c.options.epsilon.value_or(0.1 * equilibrium_mass(c.model, c.mutant->trait) / 2.0);
  constexpr double kThreshold = 0.95;
  std::string table = csv::schema_line("ecoevo-invasion-trials", 1) +
                      "trial,seed,survived_at_tK,marker_max_atom_at_tK,fixation_completed,"
                      "mutant_mass_at_tK,t_K\n";
  std::size_t n = 0, survived = 0, fixed = 0, sharp = 0;
  std::vector<double> masses;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    if (!reps[i].trial) continue;
    const auto& t = *reps[i].trial;
    table += fmt::format("{},{},{},{},{},{},{}\n", i, t.seed, t.survived_at_tK ? 1 : 0,
                         csv::num(t.marker_max_atom_at_tK), t.fixation_completed ? 1 : 0,
                         csv::num(t.mutant_mass_at_tK), csv::num(t.t_K_used));
    ++n;
    survived += t.survived_at_tK;
    fixed += t.fixation_completed;
    sharp += t.survived_at_tK && t.marker_max_atom_at_tK >= kThreshold;
    masses.push_back(t.mutant_mass_at_tK);
  }
  json sensitivity = json::array();
  for (const double factor : {0.5, 1.0, 2.0}) {
    std::size_t s = 0;
    for (const double m : masses) s += m > factor * eps;
    sensitivity.push_back({{"epsilon", factor * eps}, {"estimate", proportion(s, n).estimate}});
  }
  const double x0 = c.initial.trait, y = c.mutant->trait;
  const double f = invasion_fitness(c.model, y, x0);
  json report = {{"mode", "invasion"},
                 {"seed", c.seed},
                 {"config", result_echo(c)},
                 {"resident_trait", x0},
                 {"mutant_trait", y},
                 {"invasion_fitness", f},
                 {"oracle", f > 0.0 ? f / c.model.ecology.b(y) : 0.0},
                 {"t_K", t_K},
                 {"epsilon", eps},
                 {"survival", stats_json(proportion(survived, n))},
                 {"fixation", stats_json(proportion(fixed, n))},
                 {"bottleneck", stats_json(proportion(sharp, survived))},
                 {"bottleneck_threshold", kThreshold},
                 {"epsilon_sensitivity", sensitivity},
                 {"failed_trials", reps.size() - n}};
  return {{"invasion_trials.csv", std::move(table)}, {"report.json", report.dump(2) + "\n"}};
}

inline std::vector<OutputFile> compare_outputs(const ExperimentConfig& c,
                                               const std::vector<ReplicateOutput>& reps) {
  std::string table = csv::schema_line("ecoevo-compare-wf", 1) + "replicate,ibm_w_a,wf_w_a\n";
  std::vector<WfPair> pairs;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    if (!reps[i].pair) continue;
    const auto& p = *reps[i].pair;
    table += fmt::format("{},{},{}\n", i, p.ibm ? csv::num(*p.ibm) : std::string(), csv::num(p.wf));
    pairs.push_back(p);
  }
  const WfComparison cmp = summarize_comparison(pairs);
  json report = {{"mode", "compare-wf"},
                 {"seed", c.seed},
                 {"config", result_echo(c)},
                 {"ks_distance", cmp.ks},
                 {"ibm", mean_json(cmp.ibm)},
                 {"wf", mean_json(cmp.wf)},
                 {"pooled_se", cmp.pooled_se},
                 {"ibm_extinct", cmp.ibm_extinct}};
  return {{"compare_terminal.csv", std::move(table)}, {"report.json", report.dump(2) + "\n"}};
}

}  // namespace detail

inline std::string iif_class_label(IifClass c) { return to_string(c); }

/// Classification over an N x N grid of the trait space (resident x, mutant y).
inline std::string iif_grid_csv(const ModelSpec& spec, std::size_t n) {
  if (n < 2) throw Error(Errc::InvalidArgument, "iif grid needs N >= 2");
  std::string out = csv::schema_line("ecoevo-iif", 1) + "x,y,class,f_y_x,f_x_y\n";
  const double h = spec.trait_space.width() / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = spec.trait_space.lo + static_cast<double>(i) * h;
    for (std::size_t j = 0; j < n; ++j) {
      const double y = spec.trait_space.lo + static_cast<double>(j) * h;
      out += fmt::format("{},{},{},{},{}\n", csv::num(x), csv::num(y), to_string(classify_iif(spec, x, y)),
                         csv::num(invasion_fitness(spec, y, x)), csv::num(invasion_fitness(spec, x, y)));
    }
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::InvalidArgument, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

/// Runs every replicate of `config` and writes its outputs plus manifest.json
/// into config.output_dir. Replicate i uses stream_seed(config.seed, i).
/// Replicates run on up to config.threads workers; files are written
/// afterwards in replicate order, so outputs do not depend on the thread count.
inline RunManifest run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  RunManifest manifest;
  manifest.config = config_to_json(config);
  manifest.started_at = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr)));
  const std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);

  std::vector<OutputFile> files;
  if (config.mode == Mode::CheckIif) {
    files.push_back({"iif.csv", iif_grid_csv(config.model, config.options.grid)});
  } else {
    if (config.mode == Mode::Invasion &&
        !(invasion_fitness(config.model, config.mutant->trait, config.initial.trait) > 0.0))
      throw Error(Errc::NonPositiveFitness, "mutant.trait: invasion fitness must be > 0");
    const auto spec = std::make_shared<const ModelSpec>(config.model);
    std::optional<WfCompareSetup> wf_setup;
    if (config.mode == Mode::CompareWf)
      wf_setup = wf_compare_setup(config.model, config.initial.trait, detail::initial_w_a(config),
                                  config.horizon, config.options.wf_dt);
    std::vector<detail::ReplicateOutput> reps(config.replicates);
    parallel_for(config.replicates, config.threads, [&](std::size_t i) {
      try {
        reps[i] = detail::run_replicate(config, spec, wf_setup, i, stream_seed(config.seed, i));
      } catch (const std::exception& e) {
        reps[i] = {};
        reps[i].status = ReplicateStatus::Failed;
        reps[i].error = e.what();
      }
    });
    for (std::size_t i = 0; i < reps.size(); ++i) {
      manifest.replicates.push_back({i, stream_seed(config.seed, i), reps[i].status, reps[i].error});
      for (auto& f : reps[i].files) files.push_back(std::move(f));
    }
    if (config.replicates > 0 && !manifest.all_failed()) {
      std::vector<OutputFile> extra;
      if (config.mode == Mode::Invasion) extra = detail::invasion_outputs(config, reps);
      if (config.mode == Mode::CompareWf) extra = detail::compare_outputs(config, reps);
      for (auto& f : extra) files.push_back(std::move(f));
    }
  }
  for (const auto& f : files) {
    write_file(dir / f.name, f.content);
    manifest.files.push_back({f.name, sha256_hex(f.content), f.content.size()});
  }
  manifest.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file(dir / kManifestName, manifest.to_json().dump(2) + "\n");
  return manifest;
}

}  // namespace ecoevo
