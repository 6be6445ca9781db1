// SPDX-FileCopyrightText: 2026 aggdiff authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "aggdiff/density.hpp"
#include "aggdiff/initial_data.hpp"
#include "aggdiff/kernel.hpp"

using namespace aggdiff;

namespace {

GridDensity box(double r, double xl, double xr, double dx, double center = 0.0) {
  return build_initial({UniformBox{r}, center, true}, xl, xr, dx);
}

// Adaptive quadrature oracle on [a, b].
template <class F>
double integrate(F f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
}

}  // namespace

TEST(Grid, FromDomain) {
  const UniformGrid g = UniformGrid::from_domain(-1.0, 1.0, 0.01);
  EXPECT_EQ(g.cells, 201u);
  EXPECT_EQ(g.first_index, -100);
  EXPECT_NEAR(g.center(0), -1.0, 1e-15);
  EXPECT_NEAR(g.center(100), 0.0, 1e-15);
  EXPECT_NEAR(g.left(), -1.005, 1e-15);
  EXPECT_NEAR(g.right(), 1.005, 1e-15);
  EXPECT_THROW(UniformGrid::from_domain(-1.0, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(UniformGrid::from_domain(-1.0, 1.0, 0.3), std::invalid_argument);
  EXPECT_THROW(UniformGrid::from_domain(1.0, -1.0, 0.1), std::invalid_argument);
}

TEST(GridDensity, RejectsNegativeAndNonFinite) {
  const UniformGrid g = UniformGrid::from_domain(0.0, 0.2, 0.1);
  EXPECT_THROW(GridDensity(g, {0.0, -1.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(GridDensity(g, {0.0, NAN, 0.0}), std::invalid_argument);
  EXPECT_THROW(GridDensity(g, {0.0, 1.0}), std::invalid_argument);
}

TEST(InitialData, NarrowParabolaHasUnitMass) {
  const Parabola p{93.0 / 8.0, 961.0 / 4.0};
  const double c = 2.0 / 31.0;
  EXPECT_NEAR(p.a * (2 * c - 2.0 / 3.0 * p.b * c * c * c), 1.0, 1e-14);
  EXPECT_NEAR(profile_mass(p), 1.0, 1e-14);
  const auto [l, r] = profile_support(p);
  EXPECT_NEAR(l, -c, 1e-15);
  EXPECT_NEAR(r, c, 1e-15);
  const GridDensity rho = build_initial({p, 0.0, false}, -0.1, 0.1, 1e-4);
  EXPECT_NEAR(mass(rho), 1.0, 1e-8);
}

TEST(InitialData, ParabolaCellAveragesAreExact) {
  // Piecewise quadratic with kinks split out: Gauss-3 is exact per piece.
  const Parabola p{21.0 / 8.0, 49.0 / 4.0};
  const GridDensity rho = build_initial({p, 0.0, false}, -0.5, 0.5, 0.01);
  for (std::size_t k = 0; k < rho.size(); k += 7) {
    const double a = rho.grid().edge(k);
    const double b = rho.grid().edge(k + 1);
    const double exact = integrate([&](double x) { return std::max(p.a * (1 - p.b * x * x), 0.0); }, a, b) / 0.01;
    EXPECT_NEAR(rho[k], exact, 1e-12) << k;
  }
  EXPECT_NEAR(linf_norm(rho), 21.0 / 8.0, 21.0 / 8.0 * 49.0 / 4.0 * 1e-4);
}

TEST(InitialData, UniformBox) {
  const GridDensity rho = box(1.0, -2.0, 2.0, 0.01);
  EXPECT_NEAR(mass(rho), 1.0, 1e-14);
  EXPECT_NEAR(rho[200], 0.5, 1e-14);  // x = 0
  EXPECT_NEAR(linf_norm(rho), 0.5, 1e-14);
  EXPECT_NEAR(l2_norm_sq(rho), 0.5, 0.01);
  EXPECT_NEAR(moment(rho, 2), 1.0 / 3.0, 1e-4);
}

TEST(InitialData, OscillatingGaussianMassBeforeRenormalisation) {
  const double delta = 0.05;
  const double amp = 2 * delta / (std::sqrt(std::numbers::pi) * (1 + std::exp(-1 / (delta * delta))));
  EXPECT_NEAR(oscillating_prefactor(delta), amp, 1e-16);
  const auto f = [&](double x) { return amp * std::exp(-delta * delta * x * x) * std::cos(x) * std::cos(x); };
  // Oracle: adaptive quadrature over whole periods.
  double oracle = 0.0;
  for (double a = -120.0; a < 120.0; a += 2.0) oracle += integrate(f, a, a + 2.0);
  EXPECT_NEAR(oracle, 1.0, 1e-10);
  const GridDensity rho = build_initial({OscillatingGaussian{delta}, 0.0, false}, -110.0, 110.0, 0.01);
  EXPECT_NEAR(mass(rho), 1.0, 1e-6);

  double m2 = 0.0;
  for (double a = -120.0; a < 120.0; a += 2.0) m2 += integrate([&](double x) { return x * x * f(x); }, a, a + 2.0);
  EXPECT_NEAR(moment(rho, 2), m2, 1e-3 * m2);
  EXPECT_NEAR(m2, 1 / (2 * delta * delta), 0.01 / (2 * delta * delta));
}

TEST(InitialData, EffectiveSupportAndDomainCheck) {
  const auto [l, r] = profile_support(OscillatingGaussian{0.05});
  const double amp = oscillating_prefactor(0.05);
  EXPECT_NEAR(amp * std::exp(-0.05 * 0.05 * r * r), kEffectiveSupportFloor, 1e-20);
  EXPECT_DOUBLE_EQ(l, -r);
  EXPECT_THROW(build_initial({OscillatingGaussian{0.05}, 0.0, true}, -50.0, 50.0, 0.1), std::invalid_argument);
  EXPECT_THROW(build_initial({UniformBox{1.0}, 0.5, true}, -1.0, 1.0, 0.1), std::invalid_argument);
  EXPECT_THROW(build_initial({Parabola{-1.0, 1.0}, 0.0, true}, -2.0, 2.0, 0.1), std::invalid_argument);
}

TEST(InitialData, CenterTranslates) {
  const GridDensity a = box(0.5, -2.0, 2.0, 0.01);
  const GridDensity b = box(0.5, -2.0, 2.0, 0.01, 0.3);
  EXPECT_NEAR(center_of_mass(a), 0.0, 1e-14);
  EXPECT_NEAR(center_of_mass(b), 0.3, 1e-12);
  for (std::size_t k = 0; k + 30 < a.size(); ++k) EXPECT_NEAR(b[k + 30], a[k], 1e-13);
}

TEST(Moments, ZeroDensityAndSymmetry) {
  const GridDensity z = GridDensity::zeros(UniformGrid::from_domain(-1.0, 1.0, 0.1));
  EXPECT_EQ(mass(z), 0.0);
  EXPECT_EQ(linf_norm(z), 0.0);
  EXPECT_EQ(l2_norm_sq(z), 0.0);
  const GridDensity p = build_initial({Parabola{9.0 / 8.0, 9.0 / 4.0}, 0.0, true}, -1.0, 1.0, 0.01);
  EXPECT_NEAR(signed_moment(p, 1), 0.0, 1e-15);
}

TEST(Convolution, FastPathMatchesDirectSum) {
  const InteractionKernel g;
  const GridDensity rho = build_initial({Parabola{21.0 / 8.0, 49.0 / 4.0}, 0.1, true}, -1.0, 1.0, 0.01);
  for (int order = 0; order <= 2; ++order) {
    const std::vector<double> a = convolve(rho, g, order);
    const std::vector<double> b = convolve_fast(rho, g, order);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-10) << order << " " << k;
  }
}

TEST(Convolution, OracleValues) {
  const InteractionKernel g;
  // Near-Dirac: one unit-mass cell at 0.
  const UniformGrid grid = UniformGrid::from_domain(-1.0, 1.0, 0.01);
  std::vector<double> v(grid.cells, 0.0);
  v[100] = 1.0 / grid.dx;
  const GridDensity dirac(grid, v);
  const std::vector<double> c = convolve(dirac, g, 0);
  for (std::size_t k = 0; k < c.size(); k += 25) EXPECT_NEAR(c[k], g(grid.center(k)), 1e-12);

  // Box of half-width 1 at x = 0: (1/2) erf(1), up to the midpoint rule.
  const GridDensity b = box(1.0, -2.0, 2.0, 0.001);
  const std::vector<double> cb = convolve_fast(b, g, 0);
  EXPECT_NEAR(cb[2000], 0.5 * std::erf(1.0), 1e-6);

  // Odd derivative of a symmetric density vanishes at the centre.
  EXPECT_NEAR(convolve_fast(b, g, 1)[2000], 0.0, 1e-14);
}

TEST(Convolution, Linearity) {
  const InteractionKernel g;
  const GridDensity r1 = box(0.4, -1.0, 1.0, 0.01, 0.2);
  const GridDensity r2 = build_initial({Parabola{9.0 / 8.0, 9.0 / 4.0}, 0.0, true}, -1.0, 1.0, 0.01);
  std::vector<double> mix(r1.size());
  for (std::size_t k = 0; k < mix.size(); ++k) mix[k] = 0.3 * r1[k] + 1.7 * r2[k];
  const std::vector<double> c = convolve(r1.with_values(mix), g, 1);
  const std::vector<double> c1 = convolve(r1, g, 1);
  const std::vector<double> c2 = convolve(r2, g, 1);
  for (std::size_t k = 0; k < c.size(); ++k) EXPECT_NEAR(c[k], 0.3 * c1[k] + 1.7 * c2[k], 1e-12);
}

TEST(ActiveRange, FindsNonzeroCells) {
  const std::vector<double> v{0, 0, 1, 0, 2, 0};
  const ActiveRange r = active_range(v);
  EXPECT_EQ(r.first, 2u);
  EXPECT_EQ(r.last, 4u);
  EXPECT_TRUE(active_range(std::vector<double>(4, 0.0)).empty());
}
