// SPDX-FileCopyrightText: 2026 aggdiff authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Symmetric two-particle model X' = eps / (8 X^2) + G'(2X) / 2 for the right
// particle of a pair at +-X. Equilibria solve the balance equation
// eps = -4 X^2 G'(2X); for kernels with a unimodal -G' the right-hand side is
// a single hump, so there are two equilibria a < b below the fold value of
// eps, one at the fold and none above it.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aggdiff/kernel.hpp"
#include "aggdiff/rk23.hpp"

namespace aggdiff {

struct ToyProblem {
  double epsilon = 0.1;
  InteractionKernel kernel;

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("toy model: epsilon must be > 0");
  }
};

inline double toy_rhs(const ToyProblem& p, double x) {
  if (!(x > 0.0)) throw std::domain_error("toy_rhs: X must be positive");
  return p.epsilon / (8.0 * x * x) + 0.5 * p.kernel.eval_d1(2.0 * x);
}

/// d(toy_rhs)/dX
inline double toy_rhs_slope(const ToyProblem& p, double x) {
  return -p.epsilon / (4.0 * x * x * x) + p.kernel.eval_d2(2.0 * x);
}

/// -4 X^2 G'(2X): the diffusion constant for which X is an equilibrium.
inline double toy_balance(const InteractionKernel& kernel, double x) { return -4.0 * x * x * kernel.eval_d1(2.0 * x); }

enum class Stability { stable, unstable, semi_stable };

inline std::string to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::unstable: return "unstable";
    case Stability::semi_stable: return "semi_stable";
  }
  return "unknown";
}

struct Equilibrium {
  double x = 0.0;
  Stability stability = Stability::stable;
};

struct EquilibriumScan {
  double x_min = 1e-6;
  double x_max = 50.0;
  std::size_t points = 10000;
  double tolerance = 1e-10;
  /// A scan maximum of the balance function within this distance of eps is
  /// treated as a tangency (the fold).
  double tangency_tolerance = 1e-12;
};

namespace detail {

inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  std::vector<double> x(n);
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  x.front() = lo;
  x.back() = hi;
  return x;
}

template <class F>
double bisect_root(F f, double lo, double hi, double tol) {
  double flo = f(lo);
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Golden-section maximiser of a unimodal f on [lo, hi].
template <class F>
double golden_max(F f, double lo, double hi, double tol) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - r * (hi - lo);
  double d = lo + r * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  while (hi - lo > tol) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - r * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + r * (hi - lo);
      fd = f(d);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

struct FoldPoint {
  double x = 0.0;
  double epsilon = 0.0;
};

/// Maximum of the balance function: the largest eps with an equilibrium.
inline FoldPoint fold_point(const InteractionKernel& kernel, const EquilibriumScan& scan = {}) {
  const auto h = [&](double x) { return toy_balance(kernel, x); };
  const std::vector<double> xs = detail::log_grid(scan.x_min, scan.x_max, scan.points);
  std::size_t best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (h(xs[i]) > h(xs[best])) best = i;
  }
  const double lo = xs[best == 0 ? 0 : best - 1];
  const double hi = xs[std::min(best + 1, xs.size() - 1)];
  const double x = detail::golden_max(h, lo, hi, 1e-12);
  return {x, h(x)};
}

/// Roots of toy_rhs on [x_min, x_max], ascending.
inline std::vector<Equilibrium> find_equilibria(const ToyProblem& p, const EquilibriumScan& scan = {}) {
  p.validate();
  const auto g = [&](double x) { return toy_balance(p.kernel, x) - p.epsilon; };
  const std::vector<double> xs = detail::log_grid(scan.x_min, scan.x_max, scan.points);
  std::vector<double> gs(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) gs[i] = g(xs[i]);

  std::vector<Equilibrium> out;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    if (gs[i] == 0.0 || (gs[i] < 0.0) != (gs[i + 1] < 0.0)) {
      const double x = gs[i] == 0.0 ? xs[i] : detail::bisect_root(g, xs[i], xs[i + 1], scan.tolerance);
      out.push_back({x, toy_rhs_slope(p, x) < 0.0 ? Stability::stable : Stability::unstable});
      if (gs[i] == 0.0 && gs[i + 1] == 0.0) ++i;
    }
  }
  if (out.empty()) {
    const FoldPoint fold = fold_point(p.kernel, scan);
    if (std::abs(fold.epsilon - p.epsilon) <= scan.tangency_tolerance) {
      out.push_back({fold.x, Stability::semi_stable});
    }
  }
  return out;
}

struct ToyTrajectory {
  std::vector<double> t;
  std::vector<double> x;
};

/// Adaptive trajectory from X0 sampled every `sample_dt` (<= 0: t_end / 500)
/// and at t_end.
inline ToyTrajectory integrate_toy(const ToyProblem& p, double x0, double t_end, double sample_dt = 0.0,
                                   const Rk23Options& opt = {}) {
  p.validate();
  if (!(x0 > 0.0)) throw std::domain_error("integrate_toy: X0 must be positive");
  if (!(t_end >= 0.0)) throw std::invalid_argument("integrate_toy: t_end must be >= 0");
  if (!(sample_dt > 0.0)) sample_dt = t_end > 0.0 ? t_end / 500.0 : 1.0;

  std::vector<double> marks;
  for (std::size_t k = 1;; ++k) {
    const double t = static_cast<double>(k) * sample_dt;
    if (t >= t_end) break;
    marks.push_back(t);
  }
  marks.push_back(t_end);

  ToyTrajectory traj;
  const RhsFunction f = [&](std::span<const double> y, std::span<double> d) { d[0] = toy_rhs(p, y[0]); };
  State y{x0};
  rk23_integrate(
      f, y, 0.0, t_end, marks, opt,
      [&](double t, std::span<const double> s) {
        traj.t.push_back(t);
        traj.x.push_back(s[0]);
      },
      [](std::span<const double> s) { return s[0] > 0.0; });
  return traj;
}

enum class Basin { converges_to_a, diverges, on_separatrix };

inline std::string to_string(Basin b) {
  switch (b) {
    case Basin::converges_to_a: return "converges_to_a";
    case Basin::diverges: return "diverges";
    case Basin::on_separatrix: return "on_separatrix";
  }
  return "unknown";
}

inline constexpr double kSeparatrixTolerance = 1e-8;

/// Predicted fate of X0 from its position relative to the unstable
/// equilibrium b (or the semi-stable fold point).
inline Basin classify_basin(const ToyProblem& p, double x0, double tol = kSeparatrixTolerance) {
  if (!(x0 > 0.0)) throw std::domain_error("classify_basin: X0 must be positive");
  const std::vector<Equilibrium> eq = find_equilibria(p);
  if (eq.empty()) return Basin::diverges;
  const double b = eq.back().x;
  if (std::abs(x0 - b) <= tol) return Basin::on_separatrix;
  return x0 < b ? Basin::converges_to_a : Basin::diverges;
}

/// Row of the equilibria table: a and b are empty past the fold.
struct ToyEquilibriaRow {
  double epsilon = 0.0;
  std::optional<double> a;
  std::optional<double> b;
  double fold = 0.0;
};

inline ToyEquilibriaRow equilibria_row(const ToyProblem& p) {
  ToyEquilibriaRow row;
  row.epsilon = p.epsilon;
  row.fold = fold_point(p.kernel).epsilon;
  for (const Equilibrium& e : find_equilibria(p)) {
    if (e.stability == Stability::stable) row.a = e.x;
    if (e.stability == Stability::unstable) row.b = e.x;
    if (e.stability == Stability::semi_stable) row.a = row.b = e.x;
  }
  return row;
}

}  // namespace aggdiff
