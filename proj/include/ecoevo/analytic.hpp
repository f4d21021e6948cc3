#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "ecoevo/error.hpp"
#include "ecoevo/kernels.hpp"
#include "ecoevo/model.hpp"

namespace ecoevo {

// Deterministic large-population quantities of a ModelSpec. Everything in this
// header is a pure function of its arguments.

struct Equilibrium {
  double mass = 0.0;
  bool viable = false;  // b(x) > d(x); mass is clamped to 0 otherwise
};

/// Monomorphic equilibrium n_x = (b(x) - d(x)) / (eta(x) C(0)).
inline Equilibrium equilibrium(const EcologyModel& eco, double x) {
  const double growth = eco.b(x) - eco.d(x);
  if (!(growth > 0.0)) return {0.0, false};
  return {growth / (eco.eta(x) * eco.C(0.0)), true};
}

inline double equilibrium_mass(const ModelSpec& spec, double x) {
  return equilibrium(spec.ecology, x).mass;
}

/// Invasion fitness f(y; x) = b(y) - d(y) - eta(y) C(y - x) n_x.
inline double invasion_fitness(const ModelSpec& spec, double y, double x) {
  const auto& e = spec.ecology;
  return e.b(y) - e.d(y) - e.eta(y) * e.C(y - x) * equilibrium(e, x).mass;
}

enum class IifClass { MutantDies, FixationReplaces, Degenerate };

inline const char* to_string(IifClass c) {
  switch (c) {
    case IifClass::MutantDies: return "MutantDies";
    case IifClass::FixationReplaces: return "FixationReplaces";
    case IifClass::Degenerate: return "Degenerate";
  }
  return "?";
}

/// Evaluates the two strict branches of the invasion-implies-fixation
/// condition for resident x and mutant y. Anything else (equalities, mutual
/// invasibility) is Degenerate.
inline IifClass classify_iif(const ModelSpec& spec, double x, double y) {
  const auto& e = spec.ecology;
  const double mutant_vs_resident = (e.b(y) - e.d(y)) / (e.eta(y) * e.C(y - x));
  const double resident_alone = (e.b(x) - e.d(x)) / (e.eta(x) * e.C(0.0));
  const double resident_vs_mutant = (e.b(x) - e.d(x)) / (e.eta(x) * e.C(x - y));
  const double mutant_alone = (e.b(y) - e.d(y)) / (e.eta(y) * e.C(0.0));
  if (mutant_vs_resident < resident_alone) return IifClass::MutantDies;
  if (mutant_vs_resident > resident_alone && resident_vs_mutant < mutant_alone)
    return IifClass::FixationReplaces;
  return IifClass::Degenerate;
}

struct Trajectory {
  std::vector<double> time;
  std::vector<double> mass;
};

struct PairTrajectory {
  std::vector<double> time;
  std::vector<std::array<double, 2>> mass;
};

namespace detail {

template <class State, class Rhs>
State rk4_step(const State& y, double h, Rhs&& rhs) {
  auto axpy = [](const State& a, double s, const State& b) {
    State out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * b[i];
    return out;
  };
  const State k1 = rhs(y);
  const State k2 = rhs(axpy(y, h / 2, k1));
  const State k3 = rhs(axpy(y, h / 2, k2));
  const State k4 = rhs(axpy(y, h, k3));
  State out = y;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

template <class State, class Rhs, class Emit>
void integrate(State y, double horizon, double dt, Rhs&& rhs, Emit&& emit) {
  if (!(dt > 0.0)) throw Error(Errc::InvalidArgument, "ODE step dt must be > 0");
  if (horizon < 0.0) throw Error(Errc::InvalidArgument, "ODE horizon must be >= 0");
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  double t = 0.0;
  emit(t, y);
  for (std::size_t i = 0; i < steps; ++i) {
    const double h = std::min(dt, horizon - t);
    y = rk4_step(y, h, rhs);
    t = (i + 1 == steps) ? horizon : t + h;
    emit(t, y);
  }
}

}  // namespace detail

/// RK4 solution of dn/dt = (b(x) - d(x) - eta(x) C(0) n) n on [0, horizon].
inline Trajectory logistic_solve(const ModelSpec& spec, double x, double n0, double horizon,
                                 double dt = 1e-3) {
  if (n0 < 0.0) throw Error(Errc::InvalidArgument, "logistic_solve: n0 must be >= 0");
  const auto& e = spec.ecology;
  const double r = e.b(x) - e.d(x);
  const double a = e.eta(x) * e.C(0.0);
  Trajectory out;
  detail::integrate(
      std::array<double, 1>{n0}, horizon, dt,
      [&](const std::array<double, 1>& n) { return std::array<double, 1>{(r - a * n[0]) * n[0]}; },
      [&](double t, const std::array<double, 1>& n) {
        out.time.push_back(t);
        out.mass.push_back(n[0]);
      });
  return out;
}

/// RK4 solution of the two-trait Lotka-Volterra system.
inline PairTrajectory lv_solve(const ModelSpec& spec, double x1, double x2,
                               std::array<double, 2> n0, double horizon, double dt = 1e-3) {
  if (n0[0] < 0.0 || n0[1] < 0.0)
    throw Error(Errc::InvalidArgument, "lv_solve: initial masses must be >= 0");
  const auto& e = spec.ecology;
  const double r1 = e.b(x1) - e.d(x1);
  const double r2 = e.b(x2) - e.d(x2);
  const double a11 = e.eta(x1) * e.C(0.0), a12 = e.eta(x1) * e.C(x1 - x2);
  const double a21 = e.eta(x2) * e.C(x2 - x1), a22 = e.eta(x2) * e.C(0.0);
  PairTrajectory out;
  detail::integrate(
      n0, horizon, dt,
      [&](const std::array<double, 2>& n) {
        return std::array<double, 2>{(r1 - a11 * n[0] - a12 * n[1]) * n[0],
                                     (r2 - a21 * n[0] - a22 * n[1]) * n[1]};
      },
      [&](double t, const std::array<double, 2>& n) {
        out.time.push_back(t);
        out.mass.push_back(n);
      });
  return out;
}

struct CoexistenceEquilibrium {
  double first = 0.0;   // n*_{x1,x2}
  double second = 0.0;  // n*_{x2,x1}
  bool stable = false;  // both Jacobian eigenvalues have negative real part
  std::array<double, 2> eigenvalue_real{};
};

inline constexpr double kMaxConditionNumber = 1e12;

/// Interior equilibrium of the two-trait Lotka-Volterra system, if both
/// components are strictly positive. Throws SingularSystem when the
/// competition matrix is numerically singular.
inline std::optional<CoexistenceEquilibrium> lv_coexistence_equilibrium(const ModelSpec& spec,
                                                                        double x1, double x2) {
  if (x1 == x2) throw Error(Errc::InvalidArgument, "lv_coexistence_equilibrium: x1 == x2");
  const auto& e = spec.ecology;
  const double a11 = e.eta(x1) * e.C(0.0), a12 = e.eta(x1) * e.C(x1 - x2);
  const double a21 = e.eta(x2) * e.C(x2 - x1), a22 = e.eta(x2) * e.C(0.0);
  const double r1 = e.b(x1) - e.d(x1);
  const double r2 = e.b(x2) - e.d(x2);

  // 2x2 condition number in the Frobenius norm: ||A||_F^2 / |det A|.
  const double det = a11 * a22 - a12 * a21;
  const double frob2 = a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22;
  if (det == 0.0 || frob2 / std::abs(det) > kMaxConditionNumber)
    throw Error(Errc::SingularSystem, "competition matrix is numerically singular");

  const double n1 = (r1 * a22 - a12 * r2) / det;
  const double n2 = (a11 * r2 - a21 * r1) / det;
  if (!(n1 > 0.0 && n2 > 0.0)) return std::nullopt;

  // Jacobian at the interior point: J = -diag(n) A.
  const double j11 = -n1 * a11, j12 = -n1 * a12, j21 = -n2 * a21, j22 = -n2 * a22;
  const double tr = j11 + j22;
  const double dj = j11 * j22 - j12 * j21;
  const double disc = tr * tr - 4.0 * dj;
  CoexistenceEquilibrium out{n1, n2, false, {}};
  if (disc >= 0.0) {
    out.eigenvalue_real = {(tr + std::sqrt(disc)) / 2.0, (tr - std::sqrt(disc)) / 2.0};
  } else {
    out.eigenvalue_real = {tr / 2.0, tr / 2.0};
  }
  out.stable = out.eigenvalue_real[0] < 0.0 && out.eigenvalue_real[1] < 0.0;
  return out;
}

/// Probability that a trait jump proposal to y = x + k is accepted by the
/// substitution dynamics: [f(y; x)]_+ / b(y).
inline double jump_acceptance(const ModelSpec& spec, double x, double y) {
  const double f = invasion_fitness(spec, y, x);
  if (!(f > 0.0)) return 0.0;
  return f / spec.ecology.b(y);
}

struct JumpRate {
  double rate = 0.0;
  double error_estimate = 0.0;  // |S_n - S_{n/2}| / 15
  std::size_t intervals = 0;
};

/// Total jump rate of the trait substitution sequence out of x:
///   b(x) n_x \int [f(x+k; x)]_+ / b(x+k) m(x, k) dk,
/// by composite Simpson over the admissible displacements [lo - x, hi - x].
inline JumpRate tss_jump_rate(const ModelSpec& spec, double x, std::size_t intervals = 4096) {
  if (intervals < 2048) intervals = 2048;
  intervals = (intervals + 3) / 4 * 4;  // both the fine and the halved grid stay even
  const auto& e = spec.ecology;
  const Equilibrium eq = equilibrium(e, x);
  if (!eq.viable) return {0.0, 0.0, intervals};
  const double sd = std::sqrt(spec.mutation.trait_variance);
  const double a = spec.trait_space.lo - x;
  const double b = spec.trait_space.hi - x;
  auto integrand = [&](double k) {
    return jump_acceptance(spec, x, x + k) * conditioned_normal_density(k, sd, a, b);
  };
  auto simpson = [&](std::size_t n) {
    const double h = (b - a) / static_cast<double>(n);
    double s = integrand(a) + integrand(b);
    for (std::size_t i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * integrand(a + i * h);
    return s * h / 3.0;
  };
  const double fine = simpson(intervals);
  const double coarse = simpson(intervals / 2);
  const double scale = e.b(x) * eq.mass;
  return {scale * fine, scale * std::abs(fine - coarse) / 15.0, intervals};
}

}  // namespace ecoevo
