// SPDX-FileCopyrightText: 2026 aggdiff authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "aggdiff/density.hpp"

namespace aggdiff {

/// rho0(x) = a (1 - b x^2)_+
struct Parabola {
  double a = 0.0;
  double b = 0.0;
};

/// rho0 = 1/(2R) on [-R, R].
struct UniformBox {
  double half_width = 1.0;
};

/// rho_delta(x) = 2 delta / (sqrt(pi) (1 + exp(-1/delta^2))) exp(-(delta x)^2) cos^2(x).
struct OscillatingGaussian {
  double delta = 0.05;
};

struct CustomProfile {
  std::string name = "custom";
  std::function<double(double)> value;
  double support_left = 0.0;
  double support_right = 0.0;
};

using Profile = std::variant<Parabola, UniformBox, OscillatingGaussian, CustomProfile>;

struct InitialDatumSpec {
  Profile profile;
  double center = 0.0;
  bool renormalize = true;
};

/// Density values below this are treated as vacuum when locating the
/// effective support of profiles with unbounded support.
inline constexpr double kEffectiveSupportFloor = 1e-14;

inline double oscillating_prefactor(double delta) {
  return 2.0 * delta / (std::sqrt(std::numbers::pi) * (1.0 + std::exp(-1.0 / (delta * delta))));
}

inline void validate_profile(const Profile& p) {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Parabola>) {
          if (!(v.a > 0.0) || !(v.b > 0.0)) throw std::invalid_argument("parabola: a and b must be positive");
        } else if constexpr (std::is_same_v<T, UniformBox>) {
          if (!(v.half_width > 0.0)) throw std::invalid_argument("uniform box: R must be positive");
        } else if constexpr (std::is_same_v<T, OscillatingGaussian>) {
          if (!(v.delta > 0.0)) throw std::invalid_argument("oscillating gaussian: delta must be positive");
        } else {
          if (!v.value) throw std::invalid_argument("custom profile: missing sample function");
          if (!(v.support_right > v.support_left)) throw std::invalid_argument("custom profile: empty support");
        }
      },
      p);
}

/// Profile value at x, before translation by the datum's centre.
inline double profile_value(const Profile& p, double x) {
  return std::visit(
      [x](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Parabola>) {
          return std::max(v.a * (1.0 - v.b * x * x), 0.0);
        } else if constexpr (std::is_same_v<T, UniformBox>) {
          return std::abs(x) <= v.half_width ? 0.5 / v.half_width : 0.0;
        } else if constexpr (std::is_same_v<T, OscillatingGaussian>) {
          const double c = std::cos(x);
          const double s = v.delta * x;
          return oscillating_prefactor(v.delta) * std::exp(-s * s) * c * c;
        } else {
          return (x < v.support_left || x > v.support_right) ? 0.0 : v.value(x);
        }
      },
      p);
}

/// Support (effective support for the oscillating Gaussian), untranslated.
inline std::pair<double, double> profile_support(const Profile& p) {
  return std::visit(
      [](const auto& v) -> std::pair<double, double> {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Parabola>) {
          const double c = 1.0 / std::sqrt(v.b);
          return {-c, c};
        } else if constexpr (std::is_same_v<T, UniformBox>) {
          return {-v.half_width, v.half_width};
        } else if constexpr (std::is_same_v<T, OscillatingGaussian>) {
          const double amp = oscillating_prefactor(v.delta);
          const double r = amp > kEffectiveSupportFloor
                               ? std::sqrt(std::log(amp / kEffectiveSupportFloor)) / v.delta
                               : 0.0;
          return {-r, r};
        } else {
          return {v.support_left, v.support_right};
        }
      },
      p);
}

/// Points where the profile is not smooth (untranslated).
inline std::vector<double> profile_breakpoints(const Profile& p) {
  if (std::holds_alternative<Parabola>(p) || std::holds_alternative<UniformBox>(p) ||
      std::holds_alternative<CustomProfile>(p)) {
    const auto [l, r] = profile_support(p);
    return {l, r};
  }
  return {};
}

/// Exact mass of a closed-form profile (1 for the canonical parameters).
inline double profile_mass(const Profile& p) {
  if (const auto* q = std::get_if<Parabola>(&p)) {
    const double c = 1.0 / std::sqrt(q->b);
    return q->a * (2.0 * c - 2.0 / 3.0 * q->b * c * c * c);
  }
  if (std::holds_alternative<UniformBox>(p)) return 1.0;
  if (std::holds_alternative<OscillatingGaussian>(p)) return 1.0;
  throw std::invalid_argument("profile_mass: no closed form for custom profiles");
}

namespace detail {

/// 3-point Gauss-Legendre integral of f on [a, b].
template <class F>
double gauss3(F&& f, double a, double b) {
  static constexpr std::array<double, 3> kNodes{-0.7745966692414834, 0.0, 0.7745966692414834};
  static constexpr std::array<double, 3> kWeights{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const double h = 0.5 * (b - a);
  const double m = 0.5 * (a + b);
  double s = 0.0;
  for (int q = 0; q < 3; ++q) s += kWeights[q] * f(m + h * kNodes[q]);
  return h * s;
}

}  // namespace detail

/// Cell averages by 3-point Gauss quadrature per cell; cells that contain a
/// kink of the profile are split there so piecewise polynomials integrate
/// exactly. Throws if the (effective) support does not fit in the grid.
inline GridDensity build_initial(const InitialDatumSpec& spec, const UniformGrid& grid) {
  validate_profile(spec.profile);
  const auto [sl, sr] = profile_support(spec.profile);
  if (sl + spec.center < grid.left() - 1e-12 || sr + spec.center > grid.right() + 1e-12) {
    throw std::invalid_argument("initial datum: domain too small for the support [" +
                                std::to_string(sl + spec.center) + ", " + std::to_string(sr + spec.center) + "]");
  }
  std::vector<double> kinks = profile_breakpoints(spec.profile);
  for (double& k : kinks) k += spec.center;
  std::sort(kinks.begin(), kinks.end());

  const auto f = [&](double x) { return profile_value(spec.profile, x - spec.center); };
  std::vector<double> avg(grid.cells, 0.0);
  for (std::size_t k = 0; k < grid.cells; ++k) {
    const double a = grid.edge(k);
    const double b = grid.edge(k + 1);
    double lo = a;
    double integral = 0.0;
    for (double kink : kinks) {
      if (kink > lo && kink < b) {
        integral += detail::gauss3(f, lo, kink);
        lo = kink;
      }
    }
    integral += detail::gauss3(f, lo, b);
    avg[k] = std::max(integral / grid.dx, 0.0);
  }
  GridDensity rho(grid, std::move(avg));
  if (spec.renormalize) {
    const double m = mass(rho);
    if (!(m > 0.0)) throw std::domain_error("initial datum: zero mass on this grid");
    std::vector<double> v(rho.values().begin(), rho.values().end());
    for (double& x : v) x /= m;
    rho = rho.with_values(std::move(v));
  }
  return rho;
}

inline GridDensity build_initial(const InitialDatumSpec& spec, double x_left, double x_right, double dx) {
  return build_initial(spec, UniformGrid::from_domain(x_left, x_right, dx));
}

}  // namespace aggdiff
