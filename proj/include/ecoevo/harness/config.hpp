#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "json.hpp"

#include "ecoevo/error.hpp"
#include "ecoevo/model.hpp"

namespace ecoevo {

enum class Mode { Ibm, Tss, Fv, Wf, Sfvp, DimorphicFv, Invasion, CompareWf, CheckIif };

inline constexpr std::pair<Mode, std::string_view> kModeNames[] = {
    {Mode::Ibm, "ibm"},           {Mode::Tss, "tss"},
    {Mode::Fv, "fv"},             {Mode::Wf, "wf"},
    {Mode::Sfvp, "sfvp"},         {Mode::DimorphicFv, "dimorphic-fv"},
    {Mode::Invasion, "invasion"}, {Mode::CompareWf, "compare-wf"},
    {Mode::CheckIif, "check-iif"},
};

inline std::string_view to_string(Mode m) {
  for (const auto& [mode, name] : kModeNames)
    if (mode == m) return name;
  return "?";
}

inline std::optional<Mode> parse_mode(std::string_view s) {
  for (const auto& [mode, name] : kModeNames)
    if (name == s) return mode;
  return std::nullopt;
}

struct InitialCondition {
  double trait = -1.0;
  double marker = 0.0;
  std::optional<double> mass;                // default: equilibrium mass of `trait`
  std::optional<double> allele_a_frequency;  // two-allele runs; default: Dirac at `marker`
  bool operator==(const InitialCondition&) const = default;
};

struct MutantSpec {
  double trait = 0.0;
  std::optional<double> marker;  // dimorphic-fv: default is the resident marker
  bool operator==(const MutantSpec&) const = default;
};

struct ModeOptions {
  std::size_t particles = 1000;
  double mutation_thinning = 100.0;
  double wf_dt = 1e-4;
  std::optional<double> t_K;
  std::optional<double> epsilon;
  bool event_log = false;
  std::size_t grid = 41;
  bool operator==(const ModeOptions&) const = default;
};

struct ExperimentConfig {
  ModelSpec model;
  Mode mode = Mode::Ibm;
  double horizon = 1.0;  // real time for ibm, trait-mutation time (t / K) otherwise
  int K = 1000;
  std::size_t replicates = 1;
  std::uint64_t seed = 0;
  double sampling_interval = 0.0;
  std::string output_dir = "out";
  unsigned threads = 1;
  InitialCondition initial;
  std::optional<MutantSpec> mutant;
  ModeOptions options;
  bool operator==(const ExperimentConfig&) const = default;
};

using nlohmann::json;

namespace detail {

inline std::string join(std::string_view path, std::string_view key) {
  return path.empty() ? std::string(key) : std::string(path) + "." + std::string(key);
}

[[noreturn]] inline void config_error(std::string_view path, std::string_view what) {
  throw Error(Errc::ConfigError, std::string(path) + ": " + std::string(what));
}

inline void require_object(const json& j, std::string_view path) {
  if (!j.is_object()) config_error(path, "expected an object");
}

inline void reject_unknown(const json& j, std::string_view path,
                           std::initializer_list<std::string_view> known) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const auto k : known) ok = ok || key == k;
    if (!ok) config_error(join(path, key), "unknown key");
  }
}

inline double get_number(const json& j, std::string_view key, std::string_view path) {
  const auto p = join(path, key);
  if (!j.contains(key)) config_error(p, "missing required number");
  if (!j.at(key).is_number()) config_error(p, "expected a number");
  return j.at(key).get<double>();
}

inline double get_number(const json& j, std::string_view key, std::string_view path,
                         double fallback) {
  return j.contains(key) ? get_number(j, key, path) : fallback;
}

inline std::optional<double> get_optional_number(const json& j, std::string_view key,
                                                 std::string_view path) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get_number(j, key, path);
}

inline std::uint64_t get_unsigned(const json& j, std::string_view key, std::string_view path,
                                  std::optional<std::uint64_t> fallback = {}) {
  const auto p = join(path, key);
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    config_error(p, "missing required integer");
  }
  const auto& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  config_error(p, "expected a nonnegative integer");
}

inline std::string get_string(const json& j, std::string_view key, std::string_view path) {
  const auto p = join(path, key);
  if (!j.contains(key)) config_error(p, "missing required string");
  if (!j.at(key).is_string()) config_error(p, "expected a string");
  return j.at(key).get<std::string>();
}

inline json to_json(const ParamFn& f) {
  if (f.kind == ParamFn::Kind::Constant) return {{"kind", "constant"}, {"value", f.amplitude}};
  return {{"kind", "gaussian"},
          {"amplitude", f.amplitude},
          {"sigma", f.sigma},
          {"center", f.center}};
}

inline ParamFn param_fn_from_json(const json& j, std::string_view path) {
  require_object(j, path);
  const std::string kind = get_string(j, "kind", path);
  if (kind == "constant") {
    reject_unknown(j, path, {"kind", "value"});
    return ParamFn::constant(get_number(j, "value", path));
  }
  if (kind == "gaussian") {
    reject_unknown(j, path, {"kind", "amplitude", "sigma", "center"});
    const double sigma = get_number(j, "sigma", path);
    if (!(sigma > 0.0)) config_error(join(path, "sigma"), "must be > 0");
    return ParamFn::gaussian(get_number(j, "amplitude", path, 1.0), sigma,
                             get_number(j, "center", path, 0.0));
  }
  config_error(join(path, "kind"), "expected \"constant\" or \"gaussian\"");
}

inline Interval interval_from_json(const json& j, std::string_view path) {
  require_object(j, path);
  Interval out{get_number(j, "lo", path), get_number(j, "hi", path)};
  out.validate(std::string(path));
  return out;
}

}  // namespace detail

inline json model_to_json(const ModelSpec& m) {
  json j;
  j["ecology"] = {{"birth", detail::to_json(m.ecology.birth)},
                  {"death", detail::to_json(m.ecology.death)},
                  {"comp_sensitivity", detail::to_json(m.ecology.comp_sensitivity)},
                  {"comp_kernel", detail::to_json(m.ecology.comp_kernel)}};
  json kernel;
  if (const auto* g = std::get_if<GaussianStep>(&m.mutation.marker_kernel)) {
    kernel = {{"kind", "gaussian"}, {"variance", g->variance}};
  } else {
    const auto& t = std::get<TwoAllele>(m.mutation.marker_kernel);
    kernel = {{"kind", "two-allele"}, {"q_a", t.q_a}, {"q_A", t.q_A}};
  }
  j["mutation"] = {{"trait_variance", m.mutation.trait_variance},
                   {"p_K", m.mutation.p_K},
                   {"q_K", m.mutation.q_K},
                   {"marker_kernel", kernel}};
  j["trait_space"] = {{"lo", m.trait_space.lo}, {"hi", m.trait_space.hi}};
  if (m.marker_space.discrete()) {
    j["marker_space"] = {{"labels", m.marker_space.alphabet().labels}};
  } else {
    j["marker_space"] = {{"lo", m.marker_space.interval().lo},
                         {"hi", m.marker_space.interval().hi}};
  }
  return j;
}

inline constexpr std::string_view kDieckmannDoebeli = "dieckmann-doebeli";

/// Builds a ModelSpec from its JSON document at system size K. With
/// "preset": "dieckmann-doebeli" (optionally "sigma_b", "sigma_c") the preset
/// is expanded first; remaining keys override it, objects key by key, while
/// "trait_space", "marker_space" and "marker_kernel" are replaced whole.
inline ModelSpec model_from_json(json j, int K, std::string_view path = "model") {
  using namespace detail;
  require_object(j, path);
  if (j.contains("preset")) {
    const std::string preset = get_string(j, "preset", path);
    if (preset != kDieckmannDoebeli)
      config_error(join(path, "preset"), "unknown preset \"" + preset + "\"");
    const ModelSpec base = dieckmann_doebeli(K, get_number(j, "sigma_b", path, 0.9),
                                             get_number(j, "sigma_c", path, 0.8));
    j.erase("preset");
    j.erase("sigma_b");
    j.erase("sigma_c");
    json full = model_to_json(base);
    for (const auto& [key, value] : j.items()) {
      if (key == "ecology" || key == "mutation") {
        require_object(value, join(path, key));
        for (const auto& [k, v] : value.items()) full[key][k] = v;
      } else {
        full[key] = value;
      }
    }
    j = std::move(full);
  }
  reject_unknown(j, path, {"ecology", "mutation", "trait_space", "marker_space"});
  ModelSpec m;
  m.K = K;

  const auto eco_path = join(path, "ecology");
  if (!j.contains("ecology")) config_error(eco_path, "missing required object");
  const json& eco = j.at("ecology");
  require_object(eco, eco_path);
  reject_unknown(eco, eco_path, {"birth", "death", "comp_sensitivity", "comp_kernel"});
  auto fn = [&](const char* key) {
    if (!eco.contains(key)) config_error(join(eco_path, key), "missing required function");
    return param_fn_from_json(eco.at(key), join(eco_path, key));
  };
  m.ecology = {fn("birth"), fn("death"), fn("comp_sensitivity"), fn("comp_kernel")};

  const auto mut_path = join(path, "mutation");
  if (!j.contains("mutation")) config_error(mut_path, "missing required object");
  const json& mut = j.at("mutation");
  require_object(mut, mut_path);
  reject_unknown(mut, mut_path, {"trait_variance", "p_K", "q_K", "marker_kernel"});
  m.mutation.trait_variance = get_number(mut, "trait_variance", mut_path);
  m.mutation.p_K = get_number(mut, "p_K", mut_path);
  m.mutation.q_K = get_number(mut, "q_K", mut_path);
  const auto kernel_path = join(mut_path, "marker_kernel");
  if (!mut.contains("marker_kernel")) config_error(kernel_path, "missing required object");
  const json& kernel = mut.at("marker_kernel");
  require_object(kernel, kernel_path);
  const std::string kind = get_string(kernel, "kind", kernel_path);
  if (kind == "gaussian") {
    reject_unknown(kernel, kernel_path, {"kind", "variance"});
    m.mutation.marker_kernel = GaussianStep{get_number(kernel, "variance", kernel_path)};
  } else if (kind == "two-allele") {
    reject_unknown(kernel, kernel_path, {"kind", "q_a", "q_A"});
    m.mutation.marker_kernel =
        TwoAllele{get_number(kernel, "q_a", kernel_path), get_number(kernel, "q_A", kernel_path)};
  } else {
    config_error(join(kernel_path, "kind"), "expected \"gaussian\" or \"two-allele\"");
  }

  const auto trait_path = join(path, "trait_space");
  if (!j.contains("trait_space")) config_error(trait_path, "missing required object");
  m.trait_space = interval_from_json(j.at("trait_space"), trait_path);

  const auto marker_path = join(path, "marker_space");
  if (!j.contains("marker_space")) config_error(marker_path, "missing required object");
  const json& ms = j.at("marker_space");
  require_object(ms, marker_path);
  if (ms.contains("labels")) {
    reject_unknown(ms, marker_path, {"labels"});
    const auto& labels = ms.at("labels");
    if (!labels.is_array()) config_error(join(marker_path, "labels"), "expected an array");
    DiscreteSpace d;
    for (const auto& l : labels) {
      if (!l.is_string()) config_error(join(marker_path, "labels"), "labels must be strings");
      d.labels.push_back(l.get<std::string>());
    }
    m.marker_space = {d};
  } else {
    reject_unknown(ms, marker_path, {"lo", "hi"});
    m.marker_space = {interval_from_json(ms, marker_path)};
  }
  m.validate();
  return m;
}

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["mode"] = std::string(to_string(c.mode));
  j["seed"] = c.seed;
  j["K"] = c.K;
  j["horizon"] = c.horizon;
  j["replicates"] = c.replicates;
  j["sampling_interval"] = c.sampling_interval;
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  j["model"] = model_to_json(c.model);
  json init = {{"trait", c.initial.trait}, {"marker", c.initial.marker}};
  if (c.initial.mass) init["mass"] = *c.initial.mass;
  if (c.initial.allele_a_frequency) init["allele_a_frequency"] = *c.initial.allele_a_frequency;
  j["initial"] = init;
  if (c.mutant) {
    json mut = {{"trait", c.mutant->trait}};
    if (c.mutant->marker) mut["marker"] = *c.mutant->marker;
    j["mutant"] = mut;
  }
  json opt = {{"particles", c.options.particles},
              {"mutation_thinning", c.options.mutation_thinning},
              {"wf_dt", c.options.wf_dt},
              {"event_log", c.options.event_log},
              {"grid", c.options.grid}};
  if (c.options.t_K) opt["t_K"] = *c.options.t_K;
  if (c.options.epsilon) opt["epsilon"] = *c.options.epsilon;
  j["options"] = opt;
  return j;
}

inline std::string serialize(const ExperimentConfig& c) { return config_to_json(c).dump(2) + "\n"; }

/// Validates a configuration document. "mode" and "seed" are required.
inline ExperimentConfig config_from_json(const json& j) {
  using namespace detail;
  require_object(j, "config");
  reject_unknown(j, "", {"mode", "seed", "K", "horizon", "replicates", "sampling_interval",
                         "output_dir", "threads", "model", "initial", "mutant", "options"});
  ExperimentConfig c;
  const std::string mode = get_string(j, "mode", "");
  const auto m = parse_mode(mode);
  if (!m) config_error("mode", "unknown mode \"" + mode + "\"");
  c.mode = *m;
  c.seed = get_unsigned(j, "seed", "");
  const auto K = get_unsigned(j, "K", "", 1000);
  if (K < 1 || K > 100000000) config_error("K", "must lie in [1, 1e8]");
  c.K = static_cast<int>(K);
  c.horizon = get_number(j, "horizon", "", c.horizon);
  if (!(c.horizon >= 0.0)) config_error("horizon", "must be >= 0");
  c.replicates = get_unsigned(j, "replicates", "", 1);
  c.sampling_interval = get_number(j, "sampling_interval", "", 0.0);
  if (c.sampling_interval < 0.0) config_error("sampling_interval", "must be >= 0");
  if (j.contains("output_dir")) c.output_dir = get_string(j, "output_dir", "");
  c.threads = static_cast<unsigned>(get_unsigned(j, "threads", "", 1));
  if (c.threads < 1) config_error("threads", "must be >= 1");

  if (!j.contains("model")) config_error("model", "missing required object");
  c.model = model_from_json(j.at("model"), c.K);

  if (j.contains("initial")) {
    const json& init = j.at("initial");
    require_object(init, "initial");
    reject_unknown(init, "initial", {"trait", "marker", "mass", "allele_a_frequency"});
    c.initial.trait = get_number(init, "trait", "initial", c.initial.trait);
    c.initial.marker = get_number(init, "marker", "initial", c.initial.marker);
    c.initial.mass = get_optional_number(init, "mass", "initial");
    c.initial.allele_a_frequency = get_optional_number(init, "allele_a_frequency", "initial");
  }
  if (!c.model.trait_space.contains(c.initial.trait))
    config_error("initial.trait", "outside model.trait_space");
  if (!c.model.marker_space.contains(c.initial.marker))
    config_error("initial.marker", "outside model.marker_space");
  if (c.initial.mass && *c.initial.mass < 0.0) config_error("initial.mass", "must be >= 0");
  if (c.initial.allele_a_frequency) {
    const double w = *c.initial.allele_a_frequency;
    if (!(w >= 0.0 && w <= 1.0)) config_error("initial.allele_a_frequency", "must lie in [0, 1]");
    if (!c.model.mutation.two_allele())
      config_error("initial.allele_a_frequency", "needs a two-allele marker model");
  }

  if (j.contains("mutant")) {
    const json& mut = j.at("mutant");
    require_object(mut, "mutant");
    reject_unknown(mut, "mutant", {"trait", "marker"});
    MutantSpec ms;
    ms.trait = get_number(mut, "trait", "mutant");
    ms.marker = get_optional_number(mut, "marker", "mutant");
    if (!c.model.trait_space.contains(ms.trait))
      config_error("mutant.trait", "outside model.trait_space");
    if (ms.marker && !c.model.marker_space.contains(*ms.marker))
      config_error("mutant.marker", "outside model.marker_space");
    c.mutant = ms;
  }
  if ((c.mode == Mode::Invasion || c.mode == Mode::DimorphicFv) && !c.mutant)
    config_error("mutant", std::string("required by mode ") + std::string(to_string(c.mode)));

  if (j.contains("options")) {
    const json& opt = j.at("options");
    require_object(opt, "options");
    reject_unknown(opt, "options", {"particles", "mutation_thinning", "wf_dt", "t_K", "epsilon",
                                    "event_log", "grid"});
    c.options.particles = get_unsigned(opt, "particles", "options", c.options.particles);
    if (c.options.particles < 2) config_error("options.particles", "must be >= 2");
    c.options.mutation_thinning =
        get_number(opt, "mutation_thinning", "options", c.options.mutation_thinning);
    if (!(c.options.mutation_thinning > 0.0))
      config_error("options.mutation_thinning", "must be > 0");
    c.options.wf_dt = get_number(opt, "wf_dt", "options", c.options.wf_dt);
    if (!(c.options.wf_dt > 0.0)) config_error("options.wf_dt", "must be > 0");
    c.options.t_K = get_optional_number(opt, "t_K", "options");
    if (c.options.t_K && !(*c.options.t_K > 0.0)) config_error("options.t_K", "must be > 0");
    c.options.epsilon = get_optional_number(opt, "epsilon", "options");
    if (c.options.epsilon && !(*c.options.epsilon > 0.0))
      config_error("options.epsilon", "must be > 0");
    if (opt.contains("event_log")) {
      if (!opt.at("event_log").is_boolean()) config_error("options.event_log", "expected a boolean");
      c.options.event_log = opt.at("event_log").get<bool>();
    }
    c.options.grid = get_unsigned(opt, "grid", "options", c.options.grid);
    if (c.options.grid < 2) config_error("options.grid", "must be >= 2");
  }
  return c;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigError, path.string() + ": cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ConfigError, path.string() + ": " + e.what());
  }
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  return config_from_json(read_json_file(path));
}

}  // namespace ecoevo
