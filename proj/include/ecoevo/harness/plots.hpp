#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "ecoevo/csv.hpp"
#include "ecoevo/error.hpp"
#include "ecoevo/harness/config.hpp"
#include "ecoevo/harness/runner.hpp"

namespace ecoevo {

// Tidy long-format tables behind the three figures: one row per
// (replicate, time, trait). Inputs are the atom tables a run already wrote,
// i.e. IBM snapshots (time, trait, marker, count) or particle clouds
// (time, trait, marker, weight).

inline constexpr std::string_view kFigureNames[] = {"fig2-support", "fig3-allele-counts",
                                                     "fig4-dimorphic"};

namespace detail {

struct AtomRow {
  double time, trait, marker, weight;
};

inline std::vector<AtomRow> read_atom_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::MissingSeries, "cannot read " + path.string());
  std::vector<AtomRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::istringstream ss(line);
    AtomRow r{};
    char comma = 0;
    if (!(ss >> r.time >> comma >> r.trait >> comma >> r.marker >> comma >> r.weight))
      throw Error(Errc::MissingSeries, "malformed row in " + path.string());
    rows.push_back(r);
  }
  return rows;
}

struct CellStats {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  double first = 0.0;   // weighted sum of markers
  double second = 0.0;  // weighted sum of squared markers
  double count_a = 0.0;
  double count_A = 0.0;
};

using Cells = std::map<std::pair<double, double>, CellStats>;  // (time, trait)

inline Cells tabulate(const std::vector<AtomRow>& rows) {
  Cells cells;
  for (const auto& r : rows) {
    auto& c = cells[{r.time, r.trait}];
    c.min = std::min(c.min, r.marker);
    c.max = std::max(c.max, r.marker);
    c.total += r.weight;
    c.first += r.weight * r.marker;
    c.second += r.weight * r.marker * r.marker;
    (r.marker == 0.0 ? c.count_a : c.count_A) += r.weight;
  }
  return cells;
}

inline std::size_t replicate_of(std::string_view name) {
  // replicate_NNNN_<kind>.csv
  return static_cast<std::size_t>(std::stoul(std::string(name.substr(10, 4))));
}

}  // namespace detail

/// Writes <run_dir>/plots/<figure>.csv and returns its path. Throws
/// MissingSeries when the run cannot supply the figure.
inline std::filesystem::path emit_plot_data(const std::filesystem::path& run_dir,
                                            std::string_view figure) {
  if (std::find(std::begin(kFigureNames), std::end(kFigureNames), figure) == std::end(kFigureNames))
    throw Error(Errc::MissingSeries, "unknown figure \"" + std::string(figure) + "\"");
  const auto manifest_path = run_dir / kManifestName;
  if (!std::filesystem::exists(manifest_path))
    throw Error(Errc::MissingSeries, run_dir.string() + ": no run manifest");
  const json manifest = read_json_file(manifest_path);
  const ExperimentConfig config = config_from_json(manifest.at("config"));

  std::string_view kind;
  switch (config.mode) {
    case Mode::Ibm: kind = "_snapshots.csv"; break;
    case Mode::Fv:
    case Mode::Sfvp:
    case Mode::DimorphicFv: kind = "_cloud.csv"; break;
    default:
      throw Error(Errc::MissingSeries, fmt::format("mode {} records no marker laws", to_string(config.mode)));
  }
  const bool two_allele = config.model.mutation.two_allele();
  if (figure == "fig3-allele-counts" && !(config.mode == Mode::Ibm && two_allele))
    throw Error(Errc::MissingSeries, "fig3-allele-counts needs a two-allele ibm run");
  if (figure == "fig4-dimorphic" && config.mode != Mode::DimorphicFv && config.mode != Mode::Ibm)
    throw Error(Errc::MissingSeries, "fig4-dimorphic needs a dimorphic-fv or ibm run");

  std::vector<std::pair<std::size_t, detail::Cells>> tables;
  for (const auto& f : manifest.at("files")) {
    const std::string name = f.at("path").get<std::string>();
    if (name.size() < kind.size() || name.compare(name.size() - kind.size(), kind.size(), kind) != 0)
      continue;
    tables.emplace_back(detail::replicate_of(name), detail::tabulate(detail::read_atom_table(run_dir / name)));
  }
  if (tables.empty()) throw Error(Errc::MissingSeries, "run has no marker tables");

  std::string out;
  if (figure == "fig2-support") {
    out = csv::schema_line("ecoevo-fig2-support", 1) +
          "replicate,time,trait,marker_min,marker_max,size\n";
    for (const auto& [rep, cells] : tables)
      for (const auto& [key, c] : cells)
        out += fmt::format("{},{},{},{},{},{}\n", rep, csv::num(key.first), csv::num(key.second),
                           csv::num(c.min), csv::num(c.max), csv::num(c.total));
  } else if (figure == "fig3-allele-counts") {
    out = csv::schema_line("ecoevo-fig3-allele-counts", 1) + "replicate,time,count_a,count_A,trait\n";
    for (const auto& [rep, cells] : tables)
      for (const auto& [key, c] : cells)
        out += fmt::format("{},{},{},{},{}\n", rep, csv::num(key.first), csv::num(c.count_a),
                           csv::num(c.count_A), csv::num(key.second));
  } else {
    if (config.mode == Mode::Ibm) {
      bool dimorphic = false;
      for (const auto& [rep, cells] : tables) {
        std::map<double, int> traits_at;
        for (const auto& [key, c] : cells) dimorphic = dimorphic || ++traits_at[key.first] >= 2;
      }
      if (!dimorphic) throw Error(Errc::MissingSeries, "run never held two traits at once");
    }
    out = csv::schema_line("ecoevo-fig4-dimorphic", 1) +
          "replicate,time,trait,marker_min,marker_max,marker_mean,marker_var,size\n";
    for (const auto& [rep, cells] : tables)
      for (const auto& [key, c] : cells) {
        const double mean = c.first / c.total;
        const double var = std::max(0.0, c.second / c.total - mean * mean);
        out += fmt::format("{},{},{},{},{},{},{},{}\n", rep, csv::num(key.first), csv::num(key.second),
                           csv::num(c.min), csv::num(c.max), csv::num(mean), csv::num(var),
                           csv::num(c.total));
      }
  }
  const auto dir = run_dir / "plots";
  std::filesystem::create_directories(dir);
  const auto path = dir / (std::string(figure) + ".csv");
  write_file(path, out);
  return path;
}

}  // namespace ecoevo
