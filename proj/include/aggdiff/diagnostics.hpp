// SPDX-FileCopyrightText: 2026 aggdiff authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "aggdiff/density.hpp"
#include "aggdiff/initial_data.hpp"
#include "aggdiff/kernel.hpp"
#include "aggdiff/quantile.hpp"

namespace aggdiff {

struct DiagnosticsRow {
  double t = 0.0;
  double mass = 0.0;
  double linf = 0.0;
  double l2sq = 0.0;
  double m2 = 0.0;
  double energy = 0.0;
  double dissipation = 0.0;
  std::optional<double> w2_to_ref;
};

/// Cells with values at or below this are treated as vacuum by the
/// dissipation gradient and the steady-state residual.
inline constexpr double kVacuumThreshold = 1e-12;

/// Energy, dissipation and second-moment rate on a fixed grid, with the
/// Toeplitz kernel tables built once.
class GridDiagnostics {
 public:
  GridDiagnostics(const InteractionKernel& kernel, double epsilon, const UniformGrid& grid)
      : epsilon_(epsilon),
        grid_(grid),
        g0_(kernel, 0, grid.cells, grid.dx),
        g1_(kernel, 1, grid.cells, grid.dx) {}

  double epsilon() const { return epsilon_; }

  /// (eps/2) int rho^2 - (1/2) int rho G*rho.
  double energy(const GridDensity& rho) const {
    check(rho);
    const std::vector<double> c = convolve_fast(rho, g0_);
    double quad = 0.0;
    double inter = 0.0;
    for (std::size_t k = 0; k < rho.size(); ++k) {
      quad += rho[k] * rho[k];
      inter += rho[k] * c[k];
    }
    return rho.dx() * (0.5 * epsilon_ * quad - 0.5 * inter);
  }

  /// int rho |d/dx (eps rho - G*rho)|^2 with centred differences inside the
  /// support and one-sided ones at its edges.
  double dissipation(const GridDensity& rho) const {
    check(rho);
    const std::vector<double> c = convolve_fast(rho, g0_);
    const std::size_t n = rho.size();
    std::vector<double> phi(n);
    for (std::size_t k = 0; k < n; ++k) phi[k] = epsilon_ * rho[k] - c[k];
    const double dx = rho.dx();
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (!(rho[k] > kVacuumThreshold)) continue;
      const bool left = k > 0 && rho[k - 1] > kVacuumThreshold;
      const bool right = k + 1 < n && rho[k + 1] > kVacuumThreshold;
      double grad = 0.0;
      if (left && right) {
        grad = (phi[k + 1] - phi[k - 1]) / (2.0 * dx);
      } else if (right) {
        grad = (phi[k + 1] - phi[k]) / dx;
      } else if (left) {
        grad = (phi[k] - phi[k - 1]) / dx;
      }
      s += rho[k] * grad * grad;
    }
    return dx * s;
  }

  /// eps int rho^2 + int int (x-y) G'(x-y) rho(x) rho(y), direct double sum.
  double second_moment_rate(const GridDensity& rho) const {
    check(rho);
    const ActiveRange r = active_range(rho.values());
    if (r.empty()) return 0.0;
    double inter = 0.0;
    for (std::size_t i = r.first; i <= r.last; ++i) {
      if (rho[i] == 0.0) continue;
      double row = 0.0;
      for (std::size_t j = r.first; j <= r.last; ++j) {
        const double d = static_cast<double>(static_cast<std::int64_t>(i) - static_cast<std::int64_t>(j)) * rho.dx();
        row += d * g1_.at(i, j) * rho[j];
      }
      inter += rho[i] * row;
    }
    return epsilon_ * l2_norm_sq(rho) + rho.dx() * rho.dx() * inter;
  }

  DiagnosticsRow row(double t, const GridDensity& rho, const GridDensity* reference = nullptr,
                     std::size_t quantile_nodes = 4000) const {
    DiagnosticsRow out;
    out.t = t;
    out.mass = mass(rho);
    out.linf = linf_norm(rho);
    out.l2sq = l2_norm_sq(rho);
    out.m2 = moment(rho, 2);
    out.energy = energy(rho);
    out.dissipation = dissipation(rho);
    if (reference != nullptr) out.w2_to_ref = wasserstein_p(rho, *reference, 2.0, quantile_nodes);
    return out;
  }

 private:
  void check(const GridDensity& rho) const {
    if (rho.size() != grid_.cells || rho.grid().first_index != grid_.first_index || rho.dx() != grid_.dx) {
      throw std::invalid_argument("diagnostics: density is on a different grid");
    }
  }

  double epsilon_;
  UniformGrid grid_;
  KernelTable g0_;
  KernelTable g1_;
};

inline double energy(const GridDensity& rho, const InteractionKernel& kernel, double epsilon) {
  return GridDiagnostics(kernel, epsilon, rho.grid()).energy(rho);
}

inline double dissipation(const GridDensity& rho, const InteractionKernel& kernel, double epsilon) {
  return GridDiagnostics(kernel, epsilon, rho.grid()).dissipation(rho);
}

inline double second_moment_rate(const GridDensity& rho, const InteractionKernel& kernel, double epsilon) {
  return GridDiagnostics(kernel, epsilon, rho.grid()).second_moment_rate(rho);
}

/// Small-delta asymptotic of dM2/dt at t = 0 for the oscillating Gaussian datum.
inline double second_moment_rate_asymptotic(double epsilon, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("second_moment_rate_asymptotic: delta must be positive");
  return delta / std::sqrt(8.0 * std::numbers::pi) * (3.0 * epsilon - 1.0);
}

/// Exact dM2/dt at t = 0 for the oscillating Gaussian datum and the unit
/// Gaussian kernel (Fourier closed form, written with q = exp(-1/delta^2) to
/// avoid overflow). Its small-delta limit is
/// delta / sqrt(8 pi) (3 eps - 2 + 1/e), not the (3 eps - 1) of the
/// asymptotic above.
inline double oscillating_second_moment_rate(double epsilon, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("oscillating_second_moment_rate: delta must be positive");
  const double d2 = delta * delta;
  const double q = std::exp(-1.0 / d2);
  const double norm = (1.0 + q) * (1.0 + q);
  const double diffusion =
      epsilon * delta / (2.0 * std::sqrt(2.0 * std::numbers::pi)) * (q * q + 4.0 * std::exp(-0.5 / d2) + 3.0) / norm;
  const double s = d2 + 2.0;
  const double bracket = (4.0 / s - 1.0) * std::exp(-2.0 / s) +
                         (4.0 / s - 4.0) * std::exp(-(d2 + 1.0) / (d2 * s)) - q * q - 2.0;
  const double interaction = delta / (std::sqrt(std::numbers::pi) * std::pow(s, 1.5)) * bracket / norm;
  return diffusion + interaction;
}

namespace detail {

/// Adaptive Gauss-Kronrod over [a, b], split into pieces of length <= chunk
/// and at the given interior breakpoints.
template <class F>
double integrate_pieces(F&& f, double a, double b, std::vector<double> breaks, double chunk) {
  if (!(b > a)) return 0.0;
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  double lo = a;
  for (double br : breaks) {
    if (br <= lo) continue;
    const double hi = std::min(br, b);
    const auto pieces = static_cast<std::size_t>(std::ceil((hi - lo) / chunk));
    for (std::size_t p = 0; p < pieces; ++p) {
      const double pa = lo + (hi - lo) * static_cast<double>(p) / static_cast<double>(pieces);
      const double pb = lo + (hi - lo) * static_cast<double>(p + 1) / static_cast<double>(pieces);
      total += boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, pa, pb, 8, 1e-13);
    }
    lo = hi;
    if (lo >= b) break;
  }
  return total;
}

/// Radius beyond which G' contributes nothing to double precision sums.
inline double kernel_reach(const InteractionKernel& kernel, double span) {
  if (const auto* g = kernel.gaussian_form()) return std::min(span, 8.0 * g->width);
  return span;
}

}  // namespace detail

/// dM2/dt for a continuous profile (translated by `center`), by adaptive
/// quadrature: eps int rho^2 + int z G'(z) A(z) dz with A the
/// autocorrelation of rho.
inline double second_moment_rate(const Profile& profile, const InteractionKernel& kernel, double epsilon) {
  validate_profile(profile);
  const auto [a, b] = profile_support(profile);
  const std::vector<double> kinks = profile_breakpoints(profile);
  const auto rho = [&](double x) { return profile_value(profile, x); };
  const double span = b - a;

  const double l2 = detail::integrate_pieces([&](double x) { return rho(x) * rho(x); }, a, b, kinks, 1.0);

  const auto autocorrelation = [&](double z) {
    const double lo = std::max(a, a - z);
    const double hi = std::min(b, b - z);
    std::vector<double> br = kinks;
    for (double k : kinks) br.push_back(k - z);
    return detail::integrate_pieces([&](double y) { return rho(y + z) * rho(y); }, lo, hi, br, 1.0);
  };
  const double reach = detail::kernel_reach(kernel, span);
  // z G'(z) A(z) is even in z.
  const double inter = 2.0 * detail::integrate_pieces(
                                 [&](double z) { return z * kernel.eval_d1(z) * autocorrelation(z); }, 0.0, reach,
                                 {}, 0.5);
  return epsilon * l2 + inter;
}

/// Reduced single-integral form for the uniform box rho_R:
/// eps/(2R) + (1/(4R^2)) int_{-2R}^{2R} (2R - |z|) z G'(z) dz.
inline double uniform_box_second_moment_rate(double half_width, const InteractionKernel& kernel, double epsilon) {
  if (!(half_width > 0.0)) throw std::invalid_argument("uniform box: R must be positive");
  const double r = half_width;
  const double integral = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [&](double z) { return (2.0 * r - z) * z * kernel.eval_d1(z); }, 0.0, 2.0 * r, 15, 1e-14);
  return epsilon / (2.0 * r) + 2.0 * integral / (4.0 * r * r);
}

/// Radius R0 where the uniform-box second-moment rate changes sign
/// (positive below, negative above). Requires eps < ||G||_1.
inline double critical_box_radius(const InteractionKernel& kernel, double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon < kernel.l1_norm())) {
    throw std::domain_error("critical_box_radius: needs 0 < eps < ||G||_1");
  }
  const auto rate = [&](double r) { return uniform_box_second_moment_rate(r, kernel, epsilon); };
  double lo = 1e-3;
  while (rate(lo) <= 0.0) lo *= 0.5;
  double hi = 1.0;
  while (rate(hi) >= 0.0) {
    hi *= 2.0;
    if (hi > 1e8) throw std::domain_error("critical_box_radius: no sign change found");
  }
  while (hi - lo > 1e-12 * hi) {
    const double mid = 0.5 * (lo + hi);
    (rate(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Steady states

struct SteadyState {
  GridDensity density;
  double lagrange_constant = 0.0;
  double residual = 0.0;
  bool trivial = false;    // eps >= ||G||_1: only the zero state exists
  bool converged = false;
  std::size_t iterations = 0;
  double last_change = 0.0;  // W2 between the last two iterates
  double support_left = 0.0;
  double support_right = 0.0;
};

struct SteadyStateOptions {
  double x_left = -2.0;
  double x_right = 2.0;
  double dx = 0.01;
  double omega = 0.5;
  double w2_tolerance = 1e-10;
  double l1_tolerance = 1e-10;  // relative to the target mass
  std::size_t max_iterations = 100000;
  std::size_t quantile_nodes = 2000;
  std::optional<GridDensity> seed;  // defaults to a centred box
};

namespace detail {

inline double truncated_mass(std::span<const double> conv, double level, double epsilon, double dx) {
  double s = 0.0;
  for (double c : conv) s += std::max(c - level, 0.0);
  return dx * s / epsilon;
}

/// C with dx * sum (conv - C)_+ / eps = target, by bisection.
inline double solve_lagrange_constant(std::span<const double> conv, double target, double epsilon, double dx) {
  double hi = *std::max_element(conv.begin(), conv.end());
  double width = 1.0;
  double lo = hi - width;
  while (truncated_mass(conv, lo, epsilon, dx) < target) {
    width *= 2.0;
    lo = hi - width;
    if (width > 1e300) throw std::domain_error("steady state: cannot match the target mass");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (truncated_mass(conv, mid, epsilon, dx) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline std::vector<double> shift_values(std::span<const double> v, std::int64_t cells) {
  const auto n = static_cast<std::int64_t>(v.size());
  std::vector<double> out(v.size(), 0.0);
  for (std::int64_t k = 0; k < n; ++k) {
    const std::int64_t to = k + cells;
    if (to >= 0 && to < n) out[static_cast<std::size_t>(to)] = v[static_cast<std::size_t>(k)];
  }
  return out;
}

inline GridDensity unit_scaled(const GridDensity& rho) {
  const double m = mass(rho);
  std::vector<double> v(rho.values().begin(), rho.values().end());
  for (double& x : v) x /= m;
  return rho.with_values(std::move(v));
}

}  // namespace detail

/// One damped fixed-point update rho <- (1-omega) rho + omega (G*rho - C)_+ / eps.
/// Writes the Lagrange constant used to `lagrange_constant` if non-null.
inline GridDensity steady_state_map(const GridDensity& rho, const KernelTable& g0, double epsilon, double target_mass,
                                    double omega, double* lagrange_constant = nullptr) {
  const std::vector<double> c = convolve_fast(rho, g0);
  const double level = detail::solve_lagrange_constant(c, target_mass, epsilon, rho.dx());
  if (lagrange_constant != nullptr) *lagrange_constant = level;
  std::vector<double> next(rho.size());
  for (std::size_t k = 0; k < rho.size(); ++k) {
    next[k] = (1.0 - omega) * rho[k] + omega * std::max(c[k] - level, 0.0) / epsilon;
  }
  return rho.with_values(std::move(next));
}

/// max over {rho > threshold} of |eps rho - G*rho + C|, with C re-solved.
inline double steady_state_residual(const GridDensity& rho, const KernelTable& g0, double epsilon, double target_mass,
                                    double* lagrange_constant = nullptr) {
  const std::vector<double> c = convolve_fast(rho, g0);
  const double level = detail::solve_lagrange_constant(c, target_mass, epsilon, rho.dx());
  if (lagrange_constant != nullptr) *lagrange_constant = level;
  double r = 0.0;
  for (std::size_t k = 0; k < rho.size(); ++k) {
    if (rho[k] > kVacuumThreshold) r = std::max(r, std::abs(epsilon * rho[k] - c[k] + level));
  }
  return r;
}

/// Non-trivial stationary state eps rho = (G*rho - C)_+ of given mass and
/// centre, by damped fixed-point iteration. For eps >= ||G||_1 the zero
/// state is returned with `trivial` set.
inline SteadyState compute_steady_state(const InteractionKernel& kernel, double epsilon, double target_mass,
                                        double center, const SteadyStateOptions& opt = {}) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("steady state: eps must be positive");
  if (!(target_mass > 0.0)) throw std::invalid_argument("steady state: mass must be positive");
  if (!(opt.omega > 0.0 && opt.omega <= 1.0)) throw std::invalid_argument("steady state: omega must be in (0, 1]");
  const UniformGrid grid = UniformGrid::from_domain(opt.x_left, opt.x_right, opt.dx);

  SteadyState out;
  if (epsilon >= kernel.l1_norm()) {
    out.density = GridDensity::zeros(grid);
    out.trivial = true;
    out.converged = true;
    out.support_left = out.support_right = center;
    return out;
  }

  GridDensity rho;
  if (opt.seed) {
    if (opt.seed->size() != grid.cells || opt.seed->grid().first_index != grid.first_index) {
      throw std::invalid_argument("steady state: seed is not on the requested grid");
    }
    rho = *opt.seed;
  } else {
    const double half = std::min(1.0, 0.25 * (opt.x_right - opt.x_left));
    rho = build_initial(InitialDatumSpec{UniformBox{half}, center, true}, grid);
  }
  {
    const double m = mass(rho);
    if (!(m > 0.0)) throw std::invalid_argument("steady state: seed has zero mass");
    std::vector<double> v(rho.values().begin(), rho.values().end());
    for (double& x : v) x *= target_mass / m;
    rho = rho.with_values(std::move(v));
  }

  const KernelTable g0(kernel, 0, grid.cells, grid.dx);
  const auto w2_change = [&](const GridDensity& a, const GridDensity& b) {
    return wasserstein_p(detail::unit_scaled(a), detail::unit_scaled(b), 2.0, opt.quantile_nodes);
  };

  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    GridDensity next = steady_state_map(rho, g0, epsilon, target_mass, opt.omega);
    out.last_change = w2_change(rho, next);
    double l1 = 0.0;
    for (std::size_t k = 0; k < rho.size(); ++k) l1 += std::abs(next[k] - rho[k]);
    l1 *= grid.dx;
    rho = std::move(next);
    out.iterations = it + 1;
    // Sampled quantiles cannot see tail mass below 1/M, hence the L1 test.
    if (out.last_change < opt.w2_tolerance && l1 < opt.l1_tolerance * target_mass) {
      out.converged = true;
      break;
    }
  }
  if (out.converged) {
    // Damping leaves geometrically decaying remnants of the seed outside
    // the support; one undamped update removes them.
    rho = steady_state_map(rho, g0, epsilon, target_mass, 1.0);
  }

  // Whole-cell recentring onto the requested centre.
  const double com = signed_moment(rho, 1) / mass(rho);
  const auto shift = static_cast<std::int64_t>(std::llround((center - com) / grid.dx));
  if (shift != 0) rho = rho.with_values(detail::shift_values(rho.values(), shift));

  out.residual = steady_state_residual(rho, g0, epsilon, target_mass, &out.lagrange_constant);
  const ActiveRange r = active_range(rho.values());
  for (std::size_t k = r.first; k <= r.last && !r.empty(); ++k) {
    if (rho[k] > kVacuumThreshold) {
      out.support_left = grid.edge(k);
      break;
    }
  }
  for (std::size_t k = r.last + 1; k-- > r.first && !r.empty();) {
    if (rho[k] > kVacuumThreshold) {
      out.support_right = grid.edge(k + 1);
      break;
    }
  }
  out.density = std::move(rho);
  return out;
}

// ---------------------------------------------------------------------------
// Exponential decay fit

struct DecayFit {
  double rate = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Least-squares slope of log w2 against t; rate = -slope. Uses the window
/// w2 in [1e-10, 0.5 w2(0)] when it holds at least 5 points, otherwise every
/// point with w2 > 1e-12.
inline DecayFit w2_decay_fit(std::span<const std::pair<double, double>> series) {
  std::vector<std::pair<double, double>> valid;
  for (const auto& [t, w] : series) {
    if (w > 1e-12 && std::isfinite(w)) valid.emplace_back(t, w);
  }
  if (valid.size() < 5) throw std::invalid_argument("w2_decay_fit: need at least 5 points with w2 > 1e-12");

  const double w0 = series.front().second;
  std::vector<std::pair<double, double>> window;
  for (const auto& p : valid) {
    if (p.second >= 1e-10 && p.second <= 0.5 * w0) window.push_back(p);
  }
  const auto& pts = window.size() >= 5 ? window : valid;

  const auto n = static_cast<double>(pts.size());
  double st = 0.0, sy = 0.0;
  for (const auto& [t, w] : pts) {
    st += t;
    sy += std::log(w);
  }
  const double mt = st / n;
  const double my = sy / n;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (const auto& [t, w] : pts) {
    const double dt = t - mt;
    const double dy = std::log(w) - my;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  if (!(stt > 0.0)) throw std::invalid_argument("w2_decay_fit: all times coincide");
  const double slope = sty / stt;
  DecayFit fit;
  fit.rate = -slope;
  fit.points = pts.size();
  // A perfectly flat series is fitted exactly.
  fit.r_squared = syy > 0.0 ? (sty * sty) / (stt * syy) : 1.0;
  return fit;
}

// ---------------------------------------------------------------------------
// Local-stability hypotheses

struct HypothesisReport {
  double lambda = 0.0;
  double threshold = 0.0;          // lambda / 4
  double center = 0.0;             // centre of mass of rho0
  double steady_half_width = 0.0;  // ||u_inf - center||_inf
  double w_inf_initial = 0.0;      // W_inf(rho0, rho_inf)
  bool steady_condition = false;   // steady_half_width < threshold
  bool initial_condition = false;  // w_inf_initial < threshold
  double steady_margin() const { return threshold - steady_half_width; }
  double initial_margin() const { return threshold - w_inf_initial; }
  bool satisfied() const { return steady_condition && initial_condition; }
};

/// Compares the steady state's support half-width and W_inf(rho0, rho_inf)
/// against lambda/4. Any slack delta > 0 below the threshold is admissible,
/// so only the strict comparison with lambda/4 is reported.
inline HypothesisReport stability_hypotheses_check(const GridDensity& rho0, const SteadyState& steady,
                                                   const InteractionKernel& kernel) {
  HypothesisReport rep;
  rep.lambda = kernel.concavity_radius();
  rep.threshold = rep.lambda / 4.0;
  rep.center = center_of_mass(rho0);
  if (steady.trivial) return rep;
  const PiecewiseQuantile u0 = PiecewiseQuantile::from_density(rho0);
  const PiecewiseQuantile uinf = PiecewiseQuantile::from_density(steady.density);
  rep.steady_half_width = std::max(std::abs(uinf(0.0) - rep.center), std::abs(uinf(1.0) - rep.center));
  rep.w_inf_initial = wasserstein_inf_exact(u0, uinf);
  rep.steady_condition = rep.steady_half_width < rep.threshold;
  rep.initial_condition = rep.w_inf_initial < rep.threshold;
  return rep;
}

}  // namespace aggdiff
