// SPDX-FileCopyrightText: 2026 aggdiff authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Bogacki-Shampine 3(2) embedded Runge-Kutta pair with FSAL and max-norm
// error control. Shared by the particle solver and the two-particle model.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aggdiff {

struct Rk23Options {
  double tol_abs = 1e-6;
  double tol_rel = 1e-6;
  double safety = 0.9;
  double min_factor = 0.2;
  double max_factor = 5.0;
  double dt_min = 1e-14;
  double dt_initial = 0.0;  // <= 0: pick from the initial slope
};

/// Raised when the step size underflows dt_min.
class StepSizeUnderflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using State = std::vector<double>;
using RhsFunction = std::function<void(std::span<const double> y, std::span<double> dydt)>;
/// Returns false for states the dynamics must never reach (e.g. crossed particles).
using AdmissibleFunction = std::function<bool(std::span<const double> y)>;

struct Rk23StepResult {
  State y;
  State slope_end;  // f(y) at the new state, reused as the next first stage
  double dt_next = 0.0;
  double error = 0.0;
  bool accepted = false;
};

namespace detail {

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace detail

/// One attempted step of size dt from y with known slope k1 = f(y).
inline Rk23StepResult rk23_step(const RhsFunction& f, std::span<const double> y, std::span<const double> k1, double dt,
                                const Rk23Options& opt, const AdmissibleFunction& admissible = {}) {
  const std::size_t n = y.size();
  Rk23StepResult out;
  State stage(n), k2(n), k3(n), k4(n);
  const auto reject = [&] {
    out.accepted = false;
    out.dt_next = dt * opt.min_factor;
    return out;
  };

  for (std::size_t i = 0; i < n; ++i) stage[i] = y[i] + 0.5 * dt * k1[i];
  if (admissible && !admissible(stage)) return reject();
  f(stage, k2);
  for (std::size_t i = 0; i < n; ++i) stage[i] = y[i] + 0.75 * dt * k2[i];
  if (admissible && !admissible(stage)) return reject();
  f(stage, k3);

  out.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.y[i] = y[i] + dt * (2.0 / 9.0 * k1[i] + 1.0 / 3.0 * k2[i] + 4.0 / 9.0 * k3[i]);
  }
  if (admissible && !admissible(out.y)) return reject();
  f(out.y, k4);

  double err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = dt * (-5.0 / 72.0 * k1[i] + 1.0 / 12.0 * k2[i] + 1.0 / 9.0 * k3[i] - 1.0 / 8.0 * k4[i]);
    err = std::max(err, std::abs(e));
  }
  const double tol = opt.tol_abs + opt.tol_rel * detail::max_abs(out.y);
  out.error = err;
  if (!std::isfinite(err)) return reject();

  const double factor = err == 0.0 ? opt.max_factor
                                   : std::clamp(opt.safety * std::cbrt(tol / err), opt.min_factor, opt.max_factor);
  out.dt_next = dt * factor;
  out.accepted = err <= tol;
  if (out.accepted) out.slope_end = std::move(k4);
  return out;
}

/// Integration statistics.
struct Rk23Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
};

/// Adaptive integration from t0 to t_end. Steps are truncated so every time
/// in `checkpoints` (sorted, within [t0, t_end]) is hit exactly; `observe`
/// is called at t0, at each checkpoint and at t_end.
inline Rk23Stats rk23_integrate(const RhsFunction& f, State& y, double t0, double t_end,
                                std::span<const double> checkpoints, const Rk23Options& opt,
                                const std::function<void(double, std::span<const double>)>& observe = {},
                                const AdmissibleFunction& admissible = {}) {
  if (!(t_end >= t0)) throw std::invalid_argument("rk23_integrate: t_end < t0");
  Rk23Stats stats;
  const std::size_t n = y.size();
  State k1(n);
  const auto counted = [&](std::span<const double> s, std::span<double> d) {
    ++stats.rhs_evaluations;
    f(s, d);
  };
  counted(y, k1);

  double dt = opt.dt_initial;
  if (!(dt > 0.0)) {
    const double scale = opt.tol_abs + opt.tol_rel * detail::max_abs(y);
    const double slope = detail::max_abs(k1);
    dt = slope > 0.0 ? 0.5 * std::cbrt(scale) / slope * std::max(detail::max_abs(y), 1e-3) : 1e-3;
    dt = std::min(dt, std::max(t_end - t0, 1e-12));
  }

  if (observe) observe(t0, y);
  std::size_t next_cp = 0;
  while (next_cp < checkpoints.size() && checkpoints[next_cp] <= t0) ++next_cp;

  double t = t0;
  while (t < t_end) {
    const double target = next_cp < checkpoints.size() ? std::min(checkpoints[next_cp], t_end) : t_end;
    const bool hits_target = dt >= target - t;
    const double h = hits_target ? target - t : dt;
    if (h < opt.dt_min && !hits_target) {
      throw StepSizeUnderflow("rk23: step size underflow at t=" + std::to_string(t));
    }
    Rk23StepResult r = rk23_step(counted, y, k1, h, opt, admissible);
    if (!r.accepted) {
      ++stats.rejected;
      dt = r.dt_next;
      if (dt < opt.dt_min) throw StepSizeUnderflow("rk23: step size underflow at t=" + std::to_string(t));
      continue;
    }
    ++stats.accepted;
    y = std::move(r.y);
    k1 = std::move(r.slope_end);
    t = hits_target ? target : t + h;
    // A truncated step does not shrink the controller's proposal.
    dt = hits_target ? std::max(r.dt_next, dt * std::min(1.0, r.dt_next / h)) : r.dt_next;
    if (hits_target && next_cp < checkpoints.size() && target == checkpoints[next_cp]) {
      while (next_cp < checkpoints.size() && checkpoints[next_cp] <= t) ++next_cp;
      if (observe) observe(t, y);
    } else if (t >= t_end && observe) {
      observe(t, y);
    }
  }
  return stats;
}

}  // namespace aggdiff
