#pragma once

#include <stdexcept>
#include <string>

namespace ecoevo {

enum class Errc {
  InvalidArgument,
  ConfigError,
  ExtinctPopulation,
  UnknownTrait,
  OutOfSpace,
  RejectionLimit,
  SingularSystem,
  NoCoexistence,
  NonPositiveFitness,
  NotNormalized,
  EmptySample,
  MissingSeries,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ConfigError: return "ConfigError";
    case Errc::ExtinctPopulation: return "ExtinctPopulation";
    case Errc::UnknownTrait: return "UnknownTrait";
    case Errc::OutOfSpace: return "OutOfSpace";
    case Errc::RejectionLimit: return "RejectionLimit";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::NoCoexistence: return "NoCoexistence";
    case Errc::NonPositiveFitness: return "NonPositiveFitness";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::EmptySample: return "EmptySample";
    case Errc::MissingSeries: return "MissingSeries";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ecoevo
