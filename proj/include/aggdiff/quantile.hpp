// SPDX-FileCopyrightText: 2026 aggdiff authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Cumulative distributions, pseudo-inverses and 1D Wasserstein distances.
//
// A piecewise-constant density has a piecewise-linear CDF, so its
// pseudo-inverse u(z) = inf{x : F(x) > z} is piecewise linear between the
// cumulative mass levels and can be evaluated exactly. Vacuum gaps inside the
// support make u jump; the jump is resolved by the inf (right end of the gap).

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "aggdiff/density.hpp"

namespace aggdiff {

/// F at the cell edges: F[0] = 0 at the left boundary, F[n] = mass.
inline std::vector<double> cdf(const GridDensity& rho) {
  std::vector<double> f(rho.size() + 1, 0.0);
  const double total = mass(rho);
  if (!(total > 0.0)) throw std::domain_error("cdf: zero mass");
  double acc = 0.0;
  for (std::size_t k = 0; k < rho.size(); ++k) {
    acc += rho.dx() * rho[k];
    f[k + 1] = std::clamp(acc, 0.0, total);
  }
  f.back() = total;
  return f;
}

/// F(x), linear inside each cell.
inline double cdf_at(const GridDensity& rho, std::span<const double> f, double x) {
  const UniformGrid& g = rho.grid();
  if (x <= g.left()) return 0.0;
  if (x >= g.right()) return f.back();
  const double s = (x - g.left()) / g.dx;
  const auto k = std::min(static_cast<std::size_t>(s), rho.size() - 1);
  const double theta = s - static_cast<double>(k);
  return f[k] + theta * (f[k + 1] - f[k]);
}

/// Exact pseudo-inverse of a distribution whose CDF is linear between knots:
/// F(positions[k]) = levels[k], levels nondecreasing from 0 to 1.
class PiecewiseQuantile {
 public:
  PiecewiseQuantile() = default;

  PiecewiseQuantile(std::vector<double> positions, std::vector<double> levels)
      : positions_(std::move(positions)), levels_(std::move(levels)) {
    if (positions_.size() != levels_.size() || positions_.size() < 2) {
      throw std::invalid_argument("quantile: need matching position/level arrays of length >= 2");
    }
    for (std::size_t k = 1; k < levels_.size(); ++k) {
      if (levels_[k] < levels_[k - 1] || positions_[k] < positions_[k - 1]) {
        throw std::invalid_argument("quantile: knots must be nondecreasing");
      }
    }
  }

  /// From cell masses of a grid density, normalised to total 1.
  static PiecewiseQuantile from_density(const GridDensity& rho) {
    std::vector<double> f = cdf(rho);
    const double total = f.back();
    // Levels within the rounding of the cumulative sum are snapped to 0 or 1,
    // so underflow residue in a tail does not decide the support ends.
    const double resolution = static_cast<double>(rho.size()) * std::numeric_limits<double>::epsilon();
    for (double& v : f) {
      v = std::min(v / total, 1.0);
      if (v <= resolution) v = 0.0;
      if (v >= 1.0 - resolution) v = 1.0;
    }
    std::size_t last = rho.size();
    while (last > 0 && rho[last - 1] == 0.0) --last;
    for (std::size_t k = last; k <= rho.size(); ++k) f[k] = 1.0;
    std::vector<double> x(rho.size() + 1);
    for (std::size_t k = 0; k <= rho.size(); ++k) x[k] = rho.grid().edge(k);
    return PiecewiseQuantile(std::move(x), std::move(f));
  }

  /// u(z) = inf{x : F(x) > z}; u(1) is the right end of the support.
  double operator()(double z) const {
    if (z >= 1.0) return at_or_above(1.0);
    if (z < 0.0) z = 0.0;
    const auto it = std::upper_bound(levels_.begin(), levels_.end(), z);
    const auto k = static_cast<std::size_t>(it - levels_.begin());
    return interpolate(k, z);
  }

  /// Left limit u(z-) = inf{x : F(x) >= z}.
  double left_limit(double z) const { return z <= 0.0 ? (*this)(0.0) : at_or_above(std::min(z, 1.0)); }

  /// Levels where u changes slope or jumps.
  std::span<const double> levels() const { return levels_; }
  std::span<const double> positions() const { return positions_; }

 private:
  double at_or_above(double z) const {
    const auto it = std::lower_bound(levels_.begin(), levels_.end(), z);
    const auto k = static_cast<std::size_t>(it - levels_.begin());
    if (k == 0) return positions_.front();
    if (k >= levels_.size()) return positions_.back();
    return interpolate(k, z);
  }

  // levels_[k-1] <= z < levels_[k] (or the lower_bound analogue).
  double interpolate(std::size_t k, double z) const {
    if (k == 0) return positions_.front();
    if (k >= levels_.size()) return positions_.back();
    const double dl = levels_[k] - levels_[k - 1];
    if (!(dl > 0.0)) return positions_[k];
    const double theta = std::clamp((z - levels_[k - 1]) / dl, 0.0, 1.0);
    return positions_[k - 1] + theta * (positions_[k] - positions_[k - 1]);
  }

  std::vector<double> positions_;
  std::vector<double> levels_;
};

/// Pseudo-inverse sampled at z_j = j / M.
struct QuantileFunction {
  std::vector<double> nodes;
  std::vector<double> values;

  std::size_t intervals() const { return nodes.empty() ? 0 : nodes.size() - 1; }
};

inline QuantileFunction sample_quantile(const PiecewiseQuantile& u, std::size_t m) {
  if (m < 2) throw std::invalid_argument("pseudo_inverse: need M >= 2");
  QuantileFunction q;
  q.nodes.resize(m + 1);
  q.values.resize(m + 1);
  for (std::size_t j = 0; j <= m; ++j) {
    q.nodes[j] = static_cast<double>(j) / static_cast<double>(m);
    q.values[j] = u(q.nodes[j]);
  }
  return q;
}

inline constexpr double kUnitMassTolerance = 1e-8;

inline void require_unit_mass(const GridDensity& rho, double tol, const char* what) {
  const double m = mass(rho);
  if (std::abs(m - 1.0) > tol) {
    throw std::domain_error(std::string(what) + ": density mass " + std::to_string(m) + " is not 1");
  }
}

inline QuantileFunction pseudo_inverse(const GridDensity& rho, std::size_t m) {
  require_unit_mass(rho, kUnitMassTolerance, "pseudo_inverse");
  return sample_quantile(PiecewiseQuantile::from_density(rho), m);
}

inline constexpr double kInfinityOrder = std::numeric_limits<double>::infinity();

/// L^p([0,1]) distance of two sampled quantile functions (same nodes) by the
/// composite trapezoid rule; p = infinity gives the nodal maximum.
inline double quantile_distance(const QuantileFunction& a, const QuantileFunction& b, double p) {
  if (a.nodes.size() != b.nodes.size() || a.nodes.size() < 3) {
    throw std::invalid_argument("quantile_distance: node sets differ");
  }
  const std::size_t m = a.intervals();
  if (std::isinf(p)) {
    double s = 0.0;
    for (std::size_t j = 0; j <= m; ++j) s = std::max(s, std::abs(a.values[j] - b.values[j]));
    return s;
  }
  if (!(p >= 1.0)) throw std::invalid_argument("quantile_distance: p must be >= 1");
  double s = 0.0;
  for (std::size_t j = 0; j <= m; ++j) {
    const double w = (j == 0 || j == m) ? 0.5 : 1.0;
    s += w * std::pow(std::abs(a.values[j] - b.values[j]), p);
  }
  return std::pow(s / static_cast<double>(m), 1.0 / p);
}

/// Exact sup_z |u1(z) - u2(z)|: the difference is piecewise linear with
/// breakpoints at the union of both level sets, and may jump there.
inline double wasserstein_inf_exact(const PiecewiseQuantile& u1, const PiecewiseQuantile& u2) {
  std::vector<double> z;
  z.reserve(u1.levels().size() + u2.levels().size() + 2);
  z.insert(z.end(), u1.levels().begin(), u1.levels().end());
  z.insert(z.end(), u2.levels().begin(), u2.levels().end());
  z.push_back(0.0);
  z.push_back(1.0);
  double s = 0.0;
  for (double level : z) {
    if (level < 0.0 || level > 1.0) continue;
    s = std::max(s, std::abs(u1(level) - u2(level)));
    s = std::max(s, std::abs(u1.left_limit(level) - u2.left_limit(level)));
  }
  return s;
}

inline constexpr double kMassMismatchTolerance = 1e-6;

/// W_p between two unit-mass grid densities via quantile functions on M
/// intervals. p in {1, 2} uses the trapezoid rule; p = infinity is exact.
inline double wasserstein_p(const GridDensity& rho1, const GridDensity& rho2, double p, std::size_t m) {
  const double m1 = mass(rho1);
  const double m2 = mass(rho2);
  if (std::abs(m1 - m2) > kMassMismatchTolerance) {
    throw std::domain_error("wasserstein_p: mass mismatch " + std::to_string(m1) + " vs " + std::to_string(m2));
  }
  require_unit_mass(rho1, kMassMismatchTolerance, "wasserstein_p");
  const PiecewiseQuantile u1 = PiecewiseQuantile::from_density(rho1);
  const PiecewiseQuantile u2 = PiecewiseQuantile::from_density(rho2);
  const QuantileFunction q1 = sample_quantile(u1, m);
  const QuantileFunction q2 = sample_quantile(u2, m);
  if (std::isinf(p)) return std::max(quantile_distance(q1, q2, p), wasserstein_inf_exact(u1, u2));
  return quantile_distance(q1, q2, p);
}

inline double wasserstein_p(const PiecewiseQuantile& u1, const PiecewiseQuantile& u2, double p, std::size_t m) {
  const QuantileFunction q1 = sample_quantile(u1, m);
  const QuantileFunction q2 = sample_quantile(u2, m);
  if (std::isinf(p)) return std::max(quantile_distance(q1, q2, p), wasserstein_inf_exact(u1, u2));
  return quantile_distance(q1, q2, p);
}

}  // namespace aggdiff
