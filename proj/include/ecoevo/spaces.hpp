#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "ecoevo/error.hpp"

namespace ecoevo {

/// Closed interval [lo, hi] with lo < hi.
struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  bool contains(double z) const { return z >= lo && z <= hi; }
  double width() const { return hi - lo; }
  void validate(const std::string& where) const {
    if (!(lo < hi)) throw Error(Errc::ConfigError, where + ": require lo < hi");
  }
  bool operator==(const Interval&) const = default;
};

using TraitSpace = Interval;

/// Finite marker alphabet. A marker value is the label index stored as a double.
struct DiscreteSpace {
  std::vector<std::string> labels;

  bool contains(double u) const {
    if (u < 0.0 || u > static_cast<double>(labels.size()) - 1.0) return false;
    return u == static_cast<double>(static_cast<std::size_t>(u));
  }
  void validate(const std::string& where) const {
    if (labels.size() < 2) throw Error(Errc::ConfigError, where + ": need at least two labels");
  }
  bool operator==(const DiscreteSpace&) const = default;
};

struct MarkerSpace {
  std::variant<Interval, DiscreteSpace> space;

  bool discrete() const { return std::holds_alternative<DiscreteSpace>(space); }
  const Interval& interval() const { return std::get<Interval>(space); }
  const DiscreteSpace& alphabet() const { return std::get<DiscreteSpace>(space); }

  bool contains(double u) const {
    return std::visit([u](const auto& s) { return s.contains(u); }, space);
  }
  void validate(const std::string& where) const {
    std::visit([&](const auto& s) { s.validate(where); }, space);
  }
  bool operator==(const MarkerSpace&) const = default;
};

}  // namespace ecoevo
