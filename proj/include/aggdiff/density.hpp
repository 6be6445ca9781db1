// SPDX-FileCopyrightText: 2026 aggdiff authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aggdiff/kernel.hpp"

namespace aggdiff {

/// Uniform grid with cell centres x_i = i * dx for i in [first_index, first_index + n).
struct UniformGrid {
  std::int64_t first_index = 0;
  std::size_t cells = 0;
  double dx = 0.0;

  /// Grid whose first and last cell centres are x_left and x_right.
  /// Both endpoints must be integer multiples of dx.
  static UniformGrid from_domain(double x_left, double x_right, double dx) {
    if (!(dx > 0.0)) throw std::invalid_argument("grid: dx must be positive");
    if (!(x_right > x_left)) throw std::invalid_argument("grid: x_right must exceed x_left");
    const double lo = x_left / dx;
    const double hi = x_right / dx;
    const double il = std::round(lo);
    const double ih = std::round(hi);
    if (std::abs(lo - il) > 1e-6 || std::abs(hi - ih) > 1e-6) {
      throw std::invalid_argument("grid: domain endpoints must be multiples of dx");
    }
    return UniformGrid{static_cast<std::int64_t>(il), static_cast<std::size_t>(ih - il) + 1, dx};
  }

  double center(std::size_t k) const { return static_cast<double>(first_index + static_cast<std::int64_t>(k)) * dx; }
  /// Left edge of cell k; edge(cells) is the right boundary.
  double edge(std::size_t k) const { return center(k) - 0.5 * dx; }
  double left() const { return edge(0); }
  double right() const { return edge(cells); }
};

/// Non-negative cell averages on a uniform grid.
class GridDensity {
 public:
  GridDensity() = default;

  GridDensity(UniformGrid grid, std::vector<double> cell_avg) : grid_(grid), cell_avg_(std::move(cell_avg)) {
    if (cell_avg_.size() != grid_.cells) throw std::invalid_argument("density: size does not match grid");
    for (double v : cell_avg_) {
      if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("density: cell averages must be finite and >= 0");
    }
  }

  static GridDensity zeros(UniformGrid grid) { return GridDensity(grid, std::vector<double>(grid.cells, 0.0)); }

  const UniformGrid& grid() const { return grid_; }
  std::size_t size() const { return cell_avg_.size(); }
  double dx() const { return grid_.dx; }
  double x(std::size_t k) const { return grid_.center(k); }
  double operator[](std::size_t k) const { return cell_avg_[k]; }
  std::span<const double> values() const { return cell_avg_; }

  /// Same grid, new values.
  GridDensity with_values(std::vector<double> v) const { return GridDensity(grid_, std::move(v)); }

  /// Translate by a whole number of cells (the grid moves with the data).
  GridDensity shifted(std::int64_t cells) const {
    UniformGrid g = grid_;
    g.first_index += cells;
    return GridDensity(g, cell_avg_);
  }

 private:
  UniformGrid grid_;
  std::vector<double> cell_avg_;
};

inline double mass(const GridDensity& rho) {
  return rho.dx() * std::accumulate(rho.values().begin(), rho.values().end(), 0.0);
}

/// dx * sum |x_i|^p rho_i.
inline double moment(const GridDensity& rho, int p) {
  if (p < 0) throw std::invalid_argument("moment: p must be non-negative");
  double s = 0.0;
  for (std::size_t k = 0; k < rho.size(); ++k) s += std::pow(std::abs(rho.x(k)), p) * rho[k];
  return rho.dx() * s;
}

/// dx * sum x_i^p rho_i with signed x.
inline double signed_moment(const GridDensity& rho, int p) {
  double s = 0.0;
  for (std::size_t k = 0; k < rho.size(); ++k) s += std::pow(rho.x(k), p) * rho[k];
  return rho.dx() * s;
}

inline double center_of_mass(const GridDensity& rho) {
  const double m = mass(rho);
  if (!(m > 0.0)) throw std::domain_error("center_of_mass: zero mass");
  return signed_moment(rho, 1) / m;
}

inline double linf_norm(const GridDensity& rho) {
  return rho.size() == 0 ? 0.0 : *std::max_element(rho.values().begin(), rho.values().end());
}

inline double l2_norm_sq(const GridDensity& rho) {
  double s = 0.0;
  for (double v : rho.values()) s += v * v;
  return rho.dx() * s;
}

/// Index range [first, last] of cells with positive mass; empty -> first > last.
struct ActiveRange {
  std::size_t first = 1;
  std::size_t last = 0;
  bool empty() const { return first > last; }
};

inline ActiveRange active_range(std::span<const double> v) {
  ActiveRange r{1, 0};
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (v[k] > 0.0) {
      if (r.empty()) r.first = k;
      r.last = k;
    }
  }
  if (r.first > r.last) return ActiveRange{1, 0};
  return r;
}

/// Direct O(N^2) evaluation of (G^(k) * rho)(x_i) = dx * sum_j G^(k)(x_i - x_j) rho_j.
inline std::vector<double> convolve(const GridDensity& rho, const InteractionKernel& kernel, int derivative_order) {
  if (derivative_order < 0 || derivative_order > 2) {
    throw std::invalid_argument("convolve: derivative order must be 0, 1 or 2");
  }
  const std::size_t n = rho.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (rho[j] == 0.0) continue;
      s += kernel.derivative(derivative_order, rho.x(i) - rho.x(j)) * rho[j];
    }
    out[i] = rho.dx() * s;
  }
  return out;
}

/// Kernel samples G^(k)(d * dx) for integer offsets d in [-(n-1), n-1].
/// On a uniform grid the convolution matrix is Toeplitz, so one table
/// replaces every kernel evaluation of the double sum.
class KernelTable {
 public:
  KernelTable(const InteractionKernel& kernel, int derivative_order, std::size_t n, double dx)
      : n_(n), samples_(n == 0 ? 0 : 2 * n - 1) {
    for (std::size_t k = 0; k < samples_.size(); ++k) {
      const double d = static_cast<double>(static_cast<std::int64_t>(k) - static_cast<std::int64_t>(n) + 1);
      samples_[k] = kernel.derivative(derivative_order, d * dx);
    }
  }

  /// G^(k)((i - j) dx).
  double at(std::size_t i, std::size_t j) const { return samples_[i + n_ - 1 - j]; }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  std::vector<double> samples_;
};

/// Fast path for convolve(): Toeplitz table and active-range restriction.
inline std::vector<double> convolve_fast(const GridDensity& rho, const KernelTable& table) {
  const std::size_t n = rho.size();
  if (table.size() != n) throw std::invalid_argument("convolve_fast: table size mismatch");
  std::vector<double> out(n, 0.0);
  const ActiveRange r = active_range(rho.values());
  if (r.empty()) return out;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = r.first; j <= r.last; ++j) s += table.at(i, j) * rho[j];
    out[i] = rho.dx() * s;
  }
  return out;
}

inline std::vector<double> convolve_fast(const GridDensity& rho, const InteractionKernel& kernel, int derivative_order) {
  return convolve_fast(rho, KernelTable(kernel, derivative_order, rho.size(), rho.dx()));
}

}  // namespace aggdiff
