#pragma once

#include <string>

#include <fmt/format.h>

#include "ecoevo/csv.hpp"
#include "ecoevo/ibm.hpp"

namespace ecoevo {

inline constexpr int kEventLogVersion = 1;
inline constexpr int kSnapshotVersion = 1;

inline std::string event_log_header() {
  return csv::schema_line("ecoevo-events", kEventLogVersion) +
         "time,kind,parent_trait,parent_marker,child_trait,child_marker\n";
}

inline std::string event_log_row(const EventRecord& ev) {
  return fmt::format("{},{},{},{},{},{}\n", csv::num(ev.time), to_string(ev.kind),
                     csv::num(ev.parent_trait), csv::num(ev.parent_marker),
                     csv::num(ev.child_trait), csv::num(ev.child_marker));
}

inline std::string snapshot_header() {
  return csv::schema_line("ecoevo-snapshot", kSnapshotVersion) + "time,trait,marker,count\n";
}

/// One row per (trait, marker atom), groups in engine order, atoms ascending.
inline std::string snapshot_rows(const PopulationState& state) {
  std::string out;
  for (const auto& g : state.groups())
    for (const auto& atom : g.marker_atoms())
      out += fmt::format("{},{},{},{}\n", csv::num(state.time), csv::num(g.trait),
                         csv::num(atom.value), static_cast<long long>(atom.weight));
  return out;
}

}  // namespace ecoevo
