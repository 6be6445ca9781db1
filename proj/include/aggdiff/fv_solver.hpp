// SPDX-FileCopyrightText: 2026 aggdiff authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Positivity-preserving semi-discrete finite-volume scheme for
//   rho_t = (rho (eps rho - G*rho)_x)_x
// with minmod-limited piecewise-linear upwinding, zero-flux boundaries and
// three-stage SSP Runge-Kutta time stepping.
//
// Cells are stored k = 0..n-1; edge k+1/2 separates cells k and k+1.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aggdiff/density.hpp"
#include "aggdiff/diagnostics.hpp"
#include "aggdiff/kernel.hpp"

namespace aggdiff {

struct FvConfig {
  double epsilon = 0.0;
  double cfl = 0.4;
  double dt_max = 1e-2;
  double t_end = 1.0;
  std::vector<double> snapshot_times;
  double diagnostics_dt = 0.0;  // <= 0: diagnostics only at snapshots
  double leak_tolerance = 1e-8;

  void validate() const {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("fv: epsilon must be >= 0");
    if (!(cfl > 0.0 && cfl <= 1.0)) throw std::invalid_argument("fv: cfl must lie in (0, 1]");
    if (!(dt_max > 0.0)) throw std::invalid_argument("fv: dt_max must be positive");
    if (!(t_end > 0.0)) throw std::invalid_argument("fv: t_end must be positive");
    if (!std::is_sorted(snapshot_times.begin(), snapshot_times.end())) {
      throw std::invalid_argument("fv: snapshot times must be sorted");
    }
  }
};

struct FvState {
  double time = 0.0;
  GridDensity density;
};

/// Raised on CFL violations, NaNs, boundary leaks and non-negligible negativity.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double minmod(double a1, double a2, double a3) {
  if (a1 > 0.0 && a2 > 0.0 && a3 > 0.0) return std::min({a1, a2, a3});
  if (a1 < 0.0 && a2 < 0.0 && a3 < 0.0) return std::max({a1, a2, a3});
  return 0.0;
}

/// Limited slope of cell k; boundary cells get zero slope.
inline double limited_slope(std::span<const double> rho, std::size_t k, double dx) {
  if (k == 0 || k + 1 >= rho.size()) return 0.0;
  return minmod(2.0 * (rho[k + 1] - rho[k]) / dx, (rho[k + 1] - rho[k - 1]) / (2.0 * dx),
                2.0 * (rho[k] - rho[k - 1]) / dx);
}

inline double limited_slope(const FvState& s, std::size_t k) { return limited_slope(s.density.values(), k, s.density.dx()); }

/// Discrete velocity at edge k+1/2:
///   sum_j rho_j (G(x_{k+1} - x_j) - G(x_k - x_j)) - (eps/dx)(rho_{k+1} - rho_k).
inline double edge_velocity(const FvState& s, const InteractionKernel& kernel, double epsilon, std::size_t k) {
  const GridDensity& rho = s.density;
  if (k + 1 >= rho.size()) throw std::out_of_range("edge_velocity: not an interior edge");
  double sum = 0.0;
  for (std::size_t j = 0; j < rho.size(); ++j) {
    if (rho[j] == 0.0) continue;
    sum += rho[j] * (kernel(rho.x(k + 1) - rho.x(j)) - kernel(rho.x(k) - rho.x(j)));
  }
  return sum - epsilon / rho.dx() * (rho[k + 1] - rho[k]);
}

/// Upwind flux at edge k+1/2 given its velocity: the left cell's east
/// reconstruction for u > 0, the right cell's west reconstruction for u < 0.
inline double upwind_flux(std::span<const double> rho, std::size_t k, double dx, double u) {
  const double east = rho[k] + 0.5 * dx * limited_slope(rho, k, dx);
  const double west = rho[k + 1] - 0.5 * dx * limited_slope(rho, k + 1, dx);
  return std::max(u, 0.0) * east + std::min(u, 0.0) * west;
}

/// F_{k+1/2}; zero at the two boundary edges (k = -1 is not representable,
/// k = n-1 is the right boundary).
inline double numerical_flux(const FvState& s, const InteractionKernel& kernel, double epsilon, std::size_t k) {
  if (k + 1 >= s.density.size()) return 0.0;
  return upwind_flux(s.density.values(), k, s.density.dx(), edge_velocity(s, kernel, epsilon, k));
}

/// The scheme on a fixed grid with precomputed kernel differences.
class FvScheme {
 public:
  FvScheme(const InteractionKernel& kernel, double epsilon, const UniformGrid& grid)
      : epsilon_(epsilon), grid_(grid), diff_(grid.cells == 0 ? 0 : 2 * grid.cells - 1) {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("fv: epsilon must be >= 0");
    const auto n = static_cast<std::int64_t>(grid.cells);
    // diff_[d + n - 1] = G((d+1) dx) - G(d dx), d = k - j.
    for (std::int64_t d = -(n - 1); d <= n - 1; ++d) {
      diff_[static_cast<std::size_t>(d + n - 1)] =
          kernel(static_cast<double>(d + 1) * grid.dx) - kernel(static_cast<double>(d) * grid.dx);
    }
  }

  const UniformGrid& grid() const { return grid_; }
  double epsilon() const { return epsilon_; }

  /// Edge velocities u_{k+1/2}, k = 0..n-2. Only edges touching the active
  /// range are computed; the rest are left at zero (their flux vanishes).
  void velocities(std::span<const double> rho, std::span<double> u) const {
    std::fill(u.begin(), u.end(), 0.0);
    const ActiveRange r = active_range(rho);
    if (r.empty()) return;
    const std::size_t n = rho.size();
    const std::size_t e0 = r.first == 0 ? 0 : r.first - 1;
    const std::size_t e1 = std::min(r.last, n - 2);
    for (std::size_t k = e0; k <= e1; ++k) {
      const double* d = diff_.data() + (k + n - 1);
      double s = 0.0;
      for (std::size_t j = r.first; j <= r.last; ++j) s += rho[j] * d[-static_cast<std::ptrdiff_t>(j)];
      u[k] = s - epsilon_ / grid_.dx * (rho[k + 1] - rho[k]);
    }
  }

  /// d rho / dt = -(F_{k+1/2} - F_{k-1/2}) / dx. Returns max |u| over the
  /// edges that carry flux.
  double rhs(std::span<const double> rho, std::span<double> out) const {
    const std::size_t n = rho.size();
    std::vector<double> u(n > 0 ? n - 1 : 0);
    velocities(rho, u);
    std::vector<double> flux(n + 1, 0.0);
    double umax = 0.0;
    const ActiveRange r = active_range(rho);
    if (!r.empty()) {
      const std::size_t e0 = r.first == 0 ? 0 : r.first - 1;
      const std::size_t e1 = std::min(r.last, n - 2);
      for (std::size_t k = e0; k <= e1 && n >= 2; ++k) {
        flux[k + 1] = upwind_flux(rho, k, grid_.dx, u[k]);
        umax = std::max(umax, std::abs(u[k]));
      }
    }
    for (std::size_t k = 0; k < n; ++k) out[k] = -(flux[k + 1] - flux[k]) / grid_.dx;
    return umax;
  }

  /// Largest admissible step: min(dt_max, cfl dx / max|u|, cfl dx^2 / (2 eps max rho)).
  double stable_dt(std::span<const double> rho, double cfl, double dt_max) const {
    std::vector<double> scratch(rho.size());
    const double umax = rhs(rho, scratch);
    return stable_dt(rho, umax, cfl, dt_max);
  }

  double stable_dt(std::span<const double> rho, double umax, double cfl, double dt_max) const {
    double dt = dt_max;
    if (umax > 0.0) dt = std::min(dt, cfl * grid_.dx / umax);
    const double peak = rho.empty() ? 0.0 : *std::max_element(rho.begin(), rho.end());
    if (epsilon_ > 0.0 && peak > 0.0) dt = std::min(dt, cfl * grid_.dx * grid_.dx / (2.0 * epsilon_ * peak));
    return dt;
  }

 private:
  double epsilon_;
  UniformGrid grid_;
  std::vector<double> diff_;
};

inline std::vector<double> rhs(const FvState& s, const InteractionKernel& kernel, double epsilon) {
  FvScheme scheme(kernel, epsilon, s.density.grid());
  std::vector<double> out(s.density.size());
  scheme.rhs(s.density.values(), out);
  return out;
}

/// Negative mass allowed to be clipped after a step.
inline constexpr double kClipTolerance = 1e-12;

namespace detail {

/// Zero negative cells and rescale the rest to the previous mass. Throws if
/// the clipped (negative) mass exceeds kClipTolerance.
inline void clip_negative(std::vector<double>& v, double dx) {
  double deficit = 0.0;
  double before = 0.0;
  for (double x : v) {
    before += x;
    if (x < 0.0) deficit += x;
  }
  if (deficit == 0.0) return;
  if (-deficit * dx > kClipTolerance) {
    throw SolverError("fv: negative mass " + std::to_string(-deficit * dx) + " after step");
  }
  double after = 0.0;
  for (double& x : v) {
    if (x < 0.0) x = 0.0;
    after += x;
  }
  if (after > 0.0) {
    const double scale = before / after;
    for (double& x : v) x *= scale;
  }
}

}  // namespace detail

/// One SSP-RK3 step given the first stage l0 = rhs(rho) and its max |u|.
/// Throws SolverError if dt exceeds the admissible step.
inline FvState ssp_rk3_step(const FvState& s, const FvScheme& scheme, const FvConfig& cfg, double dt,
                            std::span<const double> l0, double umax) {
  const std::span<const double> r0 = s.density.values();
  const std::size_t n = r0.size();
  const double limit = scheme.stable_dt(r0, umax, cfg.cfl, std::numeric_limits<double>::infinity());
  if (!(dt > 0.0) || dt > limit * (1.0 + 1e-12)) {
    throw SolverError("fv: dt=" + std::to_string(dt) + " violates the CFL limit " + std::to_string(limit));
  }
  std::vector<double> l(n), r1(n), r2(n), r3(n);
  for (std::size_t k = 0; k < n; ++k) r1[k] = r0[k] + dt * l0[k];
  scheme.rhs(r1, l);
  for (std::size_t k = 0; k < n; ++k) r2[k] = 0.75 * r0[k] + 0.25 * (r1[k] + dt * l[k]);
  scheme.rhs(r2, l);
  for (std::size_t k = 0; k < n; ++k) r3[k] = r0[k] / 3.0 + 2.0 / 3.0 * (r2[k] + dt * l[k]);
  for (double x : r3) {
    if (!std::isfinite(x)) throw SolverError("fv: non-finite value at t=" + std::to_string(s.time));
  }
  detail::clip_negative(r3, s.density.dx());
  return FvState{s.time + dt, s.density.with_values(std::move(r3))};
}

inline FvState ssp_rk3_step(const FvState& s, const FvScheme& scheme, const FvConfig& cfg, double dt) {
  std::vector<double> l0(s.density.size());
  const double umax = scheme.rhs(s.density.values(), l0);
  return ssp_rk3_step(s, scheme, cfg, dt, l0, umax);
}

inline FvState ssp_rk3_step(const FvState& s, const InteractionKernel& kernel, const FvConfig& cfg, double dt) {
  return ssp_rk3_step(s, FvScheme(kernel, cfg.epsilon, s.density.grid()), cfg, dt);
}

struct FvRun {
  std::vector<FvState> snapshots;
  std::vector<DiagnosticsRow> diagnostics;
  FvState final_state;
  std::size_t steps = 0;
};

/// Integrates from t = 0 to cfg.t_end. Snapshots are taken at t = 0, at each
/// requested time and at t_end; diagnostics rows at every multiple of
/// diagnostics_dt and at every snapshot. `reference` fills w2_to_ref.
inline FvRun run(const GridDensity& initial, const InteractionKernel& kernel, const FvConfig& cfg,
                 const GridDensity* reference = nullptr) {
  cfg.validate();
  const FvScheme scheme(kernel, cfg.epsilon, initial.grid());
  const GridDiagnostics diag(kernel, cfg.epsilon, initial.grid());
  const std::size_t n = initial.size();

  std::vector<double> marks;
  marks.push_back(cfg.t_end);
  for (double t : cfg.snapshot_times) {
    if (t > 0.0 && t < cfg.t_end) marks.push_back(t);
  }
  if (cfg.diagnostics_dt > 0.0) {
    for (std::size_t k = 1;; ++k) {
      const double t = static_cast<double>(k) * cfg.diagnostics_dt;
      if (t >= cfg.t_end) break;
      marks.push_back(t);
    }
  }
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
              marks.end());

  const auto is_snapshot = [&](double t) {
    if (std::abs(t - cfg.t_end) < 1e-12) return true;
    return std::any_of(cfg.snapshot_times.begin(), cfg.snapshot_times.end(),
                       [t](double s) { return std::abs(s - t) < 1e-12; });
  };

  FvRun out;
  FvState state{0.0, initial};
  out.snapshots.push_back(state);
  out.diagnostics.push_back(diag.row(0.0, state.density, reference));

  std::vector<double> scratch(n);
  std::size_t next = 0;
  while (next < marks.size()) {
    const double target = marks[next];
    const double umax = scheme.rhs(state.density.values(), scratch);
    double dt = scheme.stable_dt(state.density.values(), umax, cfg.cfl, cfg.dt_max);
    bool hit = false;
    if (state.time + dt >= target) {
      dt = target - state.time;
      hit = true;
    }
    state = ssp_rk3_step(state, scheme, cfg, dt, scratch, umax);
    ++out.steps;
    if (hit) state.time = target;

    const double leak = state.density.dx() * (state.density[0] + state.density[n - 1]);
    if (leak > cfg.leak_tolerance) {
      throw SolverError("fv: boundary mass leak " + std::to_string(leak) + " at t=" + std::to_string(state.time) +
                        "; enlarge the domain");
    }
    if (hit) {
      out.diagnostics.push_back(diag.row(state.time, state.density, reference));
      if (is_snapshot(state.time)) out.snapshots.push_back(state);
      ++next;
    }
  }
  out.final_state = state;
  return out;
}

}  // namespace aggdiff
