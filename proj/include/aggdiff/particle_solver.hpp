// SPDX-FileCopyrightText: 2026 aggdiff authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Deterministic equal-mass particle method: N ordered particles X_1 < ... < X_N
// follow
//   X_i' = eps N (R_{i-1}^2 - R_i^2) + (1/N) sum_{k != i} G'(X_i - X_k),
//   R_i  = 1 / (N (X_{i+1} - X_i)),
// with the one-sided rows X_1' = -eps N R_1^2 + ..., X_N' = eps N R_{N-1}^2 + ...
//
// The diffusion rows above are twice the gradient of the discrete energy
// (eps/2) sum_i (X_{i+1} - X_i) R_i^2 in the particle metric, so they evolve
// the equation with diffusion constant 2 eps. ParticleDiffusion selects
// between the rows as written (the two-particle model is their N = 2 case)
// and the energy-consistent rows with eps N / 2, which approximate the
// continuum equation with diffusion constant eps.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aggdiff/density.hpp"
#include "aggdiff/diagnostics.hpp"
#include "aggdiff/kernel.hpp"
#include "aggdiff/quantile.hpp"
#include "aggdiff/rk23.hpp"

namespace aggdiff {

inline constexpr double kMinParticleGap = 1e-12;

enum class ParticleDiffusion { displayed, energy_consistent };

inline double diffusion_factor(ParticleDiffusion d) { return d == ParticleDiffusion::displayed ? 1.0 : 0.5; }

inline std::string to_string(ParticleDiffusion d) {
  return d == ParticleDiffusion::displayed ? "displayed" : "energy_consistent";
}

inline ParticleDiffusion parse_particle_diffusion(const std::string& s) {
  if (s == "displayed") return ParticleDiffusion::displayed;
  if (s == "energy_consistent") return ParticleDiffusion::energy_consistent;
  throw std::invalid_argument("unknown particle diffusion '" + s + "' (displayed | energy_consistent)");
}

struct ParticleOptions {
  Rk23Options integrator;
  ParticleDiffusion diffusion = ParticleDiffusion::displayed;
  double row_dt = 0.0;  // <= 0: rows only at snapshots
};

struct ParticleEnsemble {
  std::vector<double> positions;
  /// Mass carried by each gap [X_i, X_{i+1}] in density reconstructions;
  /// set at initialisation and normalised to sum 1.
  std::vector<double> gap_masses;
  double time = 0.0;

  std::size_t size() const { return positions.size(); }
  double mass_per_particle() const { return 1.0 / static_cast<double>(positions.size()); }

  /// Equal gap masses 1/(N-1).
  static ParticleEnsemble from_positions(std::vector<double> x, double t = 0.0) {
    if (x.size() < 2) throw std::invalid_argument("particles: need N >= 2");
    ParticleEnsemble e;
    e.gap_masses.assign(x.size() - 1, 1.0 / static_cast<double>(x.size() - 1));
    e.positions = std::move(x);
    e.time = t;
    return e;
  }
};

inline bool strictly_ordered(std::span<const double> x, double min_gap = kMinParticleGap) {
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double gap = x[i] - x[i - 1];
    if (!(gap > 0.0 && gap >= min_gap)) return false;
  }
  return true;
}

/// Particles at the 1/(N-1)-quantiles of rho0: X_1 and X_N are the support
/// endpoints. In vacuum gaps the quantile is the inf (right end of the gap).
inline ParticleEnsemble init_particles(const GridDensity& rho0, std::size_t n) {
  if (n < 2) throw std::invalid_argument("init_particles: need N >= 2");
  require_unit_mass(rho0, kUnitMassTolerance, "init_particles");
  const PiecewiseQuantile u = PiecewiseQuantile::from_density(rho0);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = u(static_cast<double>(i) / static_cast<double>(n - 1));
  return ParticleEnsemble::from_positions(std::move(x));
}

/// Particle velocities; the interaction sum is the direct O(N^2) pair sum
/// accumulated antisymmetrically.
inline void particle_rhs(std::span<const double> x, const InteractionKernel& kernel, double epsilon,
                         std::span<double> v, ParticleDiffusion diffusion = ParticleDiffusion::displayed) {
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("particle_rhs: need N >= 2");
  if (!strictly_ordered(x, 0.0) || std::any_of(x.begin(), x.end(), [](double y) { return !std::isfinite(y); })) {
    throw std::invalid_argument("particle_rhs: positions are not strictly ordered");
  }
  const double nn = static_cast<double>(n);
  const double scale = diffusion_factor(diffusion) * epsilon * nn;
  std::fill(v.begin(), v.end(), 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double r = 1.0 / (nn * (x[i + 1] - x[i]));
    const double push = scale * r * r;
    v[i] -= push;
    v[i + 1] += push;
  }
  const auto accumulate = [&](auto d1) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t k = i + 1; k < n; ++k) {
        const double f = d1(x[i] - x[k]) / nn;
        acc += f;
        v[k] -= f;
      }
      v[i] += acc;
    }
  };
  if (const GaussianForm* g = kernel.gaussian_form()) {
    const double inv_w2 = 1.0 / (g->width * g->width);
    const double coef = -2.0 * g->amplitude * inv_w2;
    accumulate([=](double d) { return coef * d * std::exp(-d * d * inv_w2); });
  } else {
    accumulate([&](double d) { return kernel.eval_d1(d); });
  }
}

inline std::vector<double> particle_rhs(const ParticleEnsemble& e, const InteractionKernel& kernel, double epsilon,
                                        ParticleDiffusion diffusion = ParticleDiffusion::displayed) {
  std::vector<double> v(e.size());
  particle_rhs(e.positions, kernel, epsilon, v, diffusion);
  return v;
}

struct ParticleStepResult {
  ParticleEnsemble ensemble;
  double dt_next = 0.0;
  double error = 0.0;
  bool accepted = false;
};

/// One embedded 2(3) step; rejected steps return the input ensemble.
inline ParticleStepResult rk23_step(const ParticleEnsemble& e, const InteractionKernel& kernel, double epsilon,
                                    double dt, const Rk23Options& opt = {},
                                    ParticleDiffusion diffusion = ParticleDiffusion::displayed) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk23_step: dt must be positive");
  const RhsFunction f = [&](std::span<const double> y, std::span<double> d) {
    particle_rhs(y, kernel, epsilon, d, diffusion);
  };
  std::vector<double> k1(e.size());
  f(e.positions, k1);
  Rk23StepResult r = rk23_step(f, e.positions, k1, dt, opt, [](std::span<const double> y) { return strictly_ordered(y); });
  ParticleStepResult out{e, r.dt_next, r.error, r.accepted};
  if (r.accepted) {
    out.ensemble.positions = std::move(r.y);
    out.ensemble.time = e.time + dt;
  }
  return out;
}

/// Piecewise-constant density gap_mass_i / (X_{i+1} - X_i) on [X_i, X_{i+1}].
struct ParticleDensity {
  std::vector<double> knots;
  std::vector<double> values;

  double mass() const {
    double m = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) m += values[i] * (knots[i + 1] - knots[i]);
    return m;
  }
  double linf() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }
  double l2sq() const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[i] * values[i] * (knots[i + 1] - knots[i]);
    return s;
  }
};

inline ParticleDensity reconstruct_density(const ParticleEnsemble& e) {
  if (!strictly_ordered(e.positions, 0.0)) throw std::invalid_argument("reconstruct_density: unordered positions");
  double total = 0.0;
  for (double m : e.gap_masses) total += m;
  ParticleDensity d;
  d.knots = e.positions;
  d.values.resize(e.gap_masses.size());
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    d.values[i] = e.gap_masses[i] / total / (e.positions[i + 1] - e.positions[i]);
  }
  return d;
}

inline PiecewiseQuantile reconstruct_quantile(const ParticleEnsemble& e) {
  std::vector<double> levels(e.size(), 0.0);
  double total = 0.0;
  for (double m : e.gap_masses) total += m;
  for (std::size_t i = 0; i + 1 < e.size(); ++i) levels[i + 1] = levels[i] + e.gap_masses[i] / total;
  levels.back() = 1.0;
  return PiecewiseQuantile(e.positions, std::move(levels));
}

/// Exact cell-overlap resampling of the reconstruction onto a grid.
inline GridDensity resample(const ParticleDensity& d, const UniformGrid& grid) {
  std::vector<double> v(grid.cells, 0.0);
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    const double a = d.knots[i];
    const double b = d.knots[i + 1];
    if (b <= grid.left() || a >= grid.right()) continue;
    const auto k0 = static_cast<std::size_t>(std::max(0.0, std::floor((a - grid.left()) / grid.dx)));
    for (std::size_t k = k0; k < grid.cells && grid.edge(k) < b; ++k) {
      const double overlap = std::min(b, grid.edge(k + 1)) - std::max(a, grid.edge(k));
      if (overlap > 0.0) v[k] += d.values[i] * overlap / grid.dx;
    }
  }
  return GridDensity(grid, std::move(v));
}

/// (1/N) sum X_i^2
inline double ensemble_second_moment(const ParticleEnsemble& e) {
  double s = 0.0;
  for (double x : e.positions) s += x * x;
  return s / static_cast<double>(e.size());
}

inline double ensemble_center_of_mass(const ParticleEnsemble& e) {
  double s = 0.0;
  for (double x : e.positions) s += x;
  return s / static_cast<double>(e.size());
}

struct ParticleRow {
  double t = 0.0;
  double m2 = 0.0;        // ensemble second moment
  double center = 0.0;    // ensemble centre of mass
  double linf = 0.0;      // of the reconstruction
  double l2sq = 0.0;
  double max_gap = 0.0;
  double min_gap = 0.0;
};

struct ParticleRun {
  std::vector<ParticleEnsemble> snapshots;
  std::vector<ParticleRow> rows;
  ParticleEnsemble final_state;
  Rk23Stats stats;
};

inline ParticleRow particle_row(const ParticleEnsemble& e) {
  ParticleRow r;
  r.t = e.time;
  r.m2 = ensemble_second_moment(e);
  r.center = ensemble_center_of_mass(e);
  const ParticleDensity d = reconstruct_density(e);
  r.linf = d.linf();
  r.l2sq = d.l2sq();
  r.min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < e.size(); ++i) {
    const double g = e.positions[i + 1] - e.positions[i];
    r.max_gap = std::max(r.max_gap, g);
    r.min_gap = std::min(r.min_gap, g);
  }
  return r;
}

/// Adaptive integration of an ensemble to t_end, recording snapshots at the
/// requested times (hit exactly by step truncation) plus rows every
/// `opt.row_dt`.
inline ParticleRun run_particles(const ParticleEnsemble& start, const InteractionKernel& kernel, double epsilon,
                                 double t_end, std::span<const double> snapshot_times,
                                 const ParticleOptions& opt = {}) {
  const double row_dt = opt.row_dt;
  if (!strictly_ordered(start.positions)) throw std::invalid_argument("run_particles: unordered initial positions");
  std::vector<double> marks(snapshot_times.begin(), snapshot_times.end());
  if (row_dt > 0.0) {
    for (std::size_t k = 1;; ++k) {
      const double t = start.time + static_cast<double>(k) * row_dt;
      if (t >= t_end) break;
      marks.push_back(t);
    }
  }
  marks.push_back(t_end);
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
  std::erase_if(marks, [&](double t) { return t <= start.time || t > t_end; });

  const auto is_snapshot = [&](double t) {
    return t == t_end || std::find(snapshot_times.begin(), snapshot_times.end(), t) != snapshot_times.end();
  };

  ParticleRun out;
  ParticleEnsemble current = start;
  const RhsFunction f = [&](std::span<const double> y, std::span<double> d) {
    particle_rhs(y, kernel, epsilon, d, opt.diffusion);
  };
  const auto observe = [&](double t, std::span<const double> y) {
    current.positions.assign(y.begin(), y.end());
    current.time = t;
    out.rows.push_back(particle_row(current));
    if (t == start.time || is_snapshot(t)) out.snapshots.push_back(current);
  };
  State y = start.positions;
  try {
    out.stats = rk23_integrate(f, y, start.time, t_end, marks, opt.integrator, observe,
                               [](std::span<const double> s) { return strictly_ordered(s); });
  } catch (const StepSizeUnderflow& e) {
    throw StepSizeUnderflow(std::string("particles collided: ") + e.what());
  }
  current.positions = std::move(y);
  current.time = t_end;
  out.final_state = current;
  return out;
}

inline ParticleRun run_particles(const GridDensity& rho0, std::size_t n, const InteractionKernel& kernel,
                                 double epsilon, double t_end, std::span<const double> snapshot_times,
                                 const ParticleOptions& opt = {}) {
  return run_particles(init_particles(rho0, n), kernel, epsilon, t_end, snapshot_times, opt);
}

}  // namespace aggdiff
