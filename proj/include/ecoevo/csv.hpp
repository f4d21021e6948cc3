#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include <fmt/format.h>

namespace ecoevo::csv {

/// Shortest representation that round-trips; empty for NaN.
inline std::string num(double v) {
  if (std::isnan(v)) return {};
  return fmt::format("{}", v);
}

/// First line of every CSV file: `# <schema>/<version>`.
inline std::string schema_line(std::string_view schema, int version) {
  return fmt::format("# {}/{}\n", schema, version);
}

}  // namespace ecoevo::csv
