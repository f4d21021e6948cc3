#pragma once

#include <cmath>

namespace ecoevo {

/// Parametric rate function of one real argument.
///
/// Two families cover every ecology used here: a constant, and a Gaussian bump
/// `amplitude * exp(-(z - center)^2 / (2 sigma^2))`.
struct ParamFn {
  enum class Kind { Constant, GaussianBump };

  Kind kind = Kind::Constant;
  double amplitude = 0.0;  // the constant value for Kind::Constant
  double sigma = 1.0;
  double center = 0.0;

  static ParamFn constant(double value) { return {Kind::Constant, value, 1.0, 0.0}; }
  static ParamFn gaussian(double amplitude, double sigma, double center = 0.0) {
    return {Kind::GaussianBump, amplitude, sigma, center};
  }

  double operator()(double z) const {
    if (kind == Kind::Constant) return amplitude;
    const double d = z - center;
    return amplitude * std::exp(-d * d / (2.0 * sigma * sigma));
  }

  bool operator==(const ParamFn&) const = default;
};

}  // namespace ecoevo
