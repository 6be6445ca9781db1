// SPDX-FileCopyrightText: 2026 aggdiff authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>
#include <numeric>

#include <gtest/gtest.h>

#include "aggdiff/initial_data.hpp"
#include "aggdiff/particle_solver.hpp"
#include "aggdiff/toy_model.hpp"

using namespace aggdiff;

namespace {

// Hand-written velocities for the Gaussian kernel, factor c on the diffusion.
std::vector<double> velocities_ref(const std::vector<double>& x, double eps, double c) {
  const std::size_t n = x.size();
  const double nn = static_cast<double>(n);
  const auto dg = [](double d) { return -2.0 * d * std::exp(-d * d) / std::sqrt(std::numbers::pi); };
  const auto r = [&](std::size_t i) { return 1.0 / (nn * (x[i + 1] - x[i])); };
  std::vector<double> v(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i > 0 ? r(i - 1) * r(i - 1) : 0.0;
    const double right = i + 1 < n ? r(i) * r(i) : 0.0;
    v[i] = c * eps * nn * (left - right);
    for (std::size_t k = 0; k < n; ++k) {
      if (k != i) v[i] += dg(x[i] - x[k]) / nn;
    }
  }
  return v;
}

GridDensity narrow_parabola() {
  return build_initial({Parabola{93.0 / 8.0, 961.0 / 4.0}, 0.0, true}, -0.1, 0.1, 1e-3);
}

}  // namespace

TEST(InitParticles, UniformBoxQuantiles) {
  // Cell edges at +-1 make the box exactly representable.
  const GridDensity box = build_initial({UniformBox{1.0}, 0.0, true}, -2.0, 2.0, 0.4);
  const ParticleEnsemble e = init_particles(box, 5);
  const std::vector<double> expected{-1.0, -0.5, 0.0, 0.5, 1.0};
  ASSERT_EQ(e.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(e.positions[i], expected[i], 1e-12) << i;
  EXPECT_DOUBLE_EQ(e.mass_per_particle(), 0.2);
}

TEST(InitParticles, ParabolaEndpointsAndMedian) {
  // Support ends at cell centres: the outermost cells reach half a cell beyond.
  const double dx = 2.0 / 31.0 / 40.0;
  const GridDensity p = build_initial({Parabola{93.0 / 8.0, 961.0 / 4.0}, 0.0, true},
                                      UniformGrid::from_domain(-60 * dx, 60 * dx, dx));
  const ParticleEnsemble e = init_particles(p, 3);
  EXPECT_NEAR(e.positions[0], -2.0 / 31.0 - 0.5 * dx, 1e-14);
  EXPECT_NEAR(e.positions[1], 0.0, 1e-10);
  EXPECT_NEAR(e.positions[2], 2.0 / 31.0 + 0.5 * dx, 1e-14);
  EXPECT_NEAR(e.positions[0], -e.positions[2], 1e-12);

  const ParticleEnsemble odd = init_particles(narrow_parabola(), 101);
  EXPECT_NEAR(odd.positions[50], 0.0, 1e-10);
  EXPECT_TRUE(strictly_ordered(odd.positions));
}

TEST(InitParticles, RejectsBadInput) {
  EXPECT_THROW(init_particles(narrow_parabola(), 1), std::invalid_argument);
  const GridDensity p = narrow_parabola();
  std::vector<double> v(p.values().begin(), p.values().end());
  for (double& x : v) x *= 3.0;
  EXPECT_THROW(init_particles(p.with_values(v), 10), std::domain_error);
}

TEST(ParticleRhs, TwoParticlesMatchToyModel) {
  const InteractionKernel g;
  for (double eps : {0.0, 0.1, 0.3}) {
    for (double x : {0.2, 0.7, 1.5}) {
      const std::vector<double> v = particle_rhs(ParticleEnsemble::from_positions({-x, x}), g, eps);
      EXPECT_NEAR(v[1], toy_rhs(ToyProblem{eps, g}, x), 1e-14) << eps << " " << x;
      EXPECT_DOUBLE_EQ(v[0], -v[1]);
      const double r1 = 1.0 / (2.0 * 2.0 * x);
      EXPECT_NEAR(v[1], 2.0 * eps * r1 * r1 + 0.5 * g.eval_d1(2.0 * x), 1e-14);
    }
  }
}

TEST(ParticleRhs, PureInteractionOracle) {
  const std::vector<double> v = particle_rhs(ParticleEnsemble::from_positions({-1.0, 1.0}), InteractionKernel(), 0.0);
  EXPECT_NEAR(v[1], 0.5 * (-2.0 * 2.0 * std::exp(-4.0) / std::sqrt(std::numbers::pi)), 1e-15);
}

TEST(ParticleRhs, MatchesDirectFormulaBothConventions) {
  const std::vector<double> x{-1.3, -0.6, -0.5, 0.1, 0.9, 2.0};
  for (auto d : {ParticleDiffusion::displayed, ParticleDiffusion::energy_consistent}) {
    const std::vector<double> v = particle_rhs(ParticleEnsemble::from_positions(x), InteractionKernel(), 0.4, d);
    const std::vector<double> ref = velocities_ref(x, 0.4, diffusion_factor(d));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(v[i], ref[i], 1e-13) << to_string(d) << " " << i;
  }
  EXPECT_EQ(diffusion_factor(ParticleDiffusion::displayed), 1.0);
  EXPECT_EQ(diffusion_factor(ParticleDiffusion::energy_consistent), 0.5);
  EXPECT_EQ(parse_particle_diffusion("energy_consistent"), ParticleDiffusion::energy_consistent);
  EXPECT_THROW(parse_particle_diffusion("half"), std::invalid_argument);
}

TEST(ParticleRhs, CustomKernelPathAgreesWithGaussianFastPath) {
  CustomForm c;
  c.name = "gaussian-by-hand";
  c.value = [](double d) { return std::exp(-d * d) / std::sqrt(std::numbers::pi); };
  c.d1 = [](double d) { return -2.0 * d * std::exp(-d * d) / std::sqrt(std::numbers::pi); };
  c.d2 = [](double d) { return (4.0 * d * d - 2.0) * std::exp(-d * d) / std::sqrt(std::numbers::pi); };
  const ParticleEnsemble e = init_particles(narrow_parabola(), 40);
  const std::vector<double> a = particle_rhs(e, InteractionKernel(), 0.2);
  const std::vector<double> b = particle_rhs(e, InteractionKernel(c), 0.2);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-10 * (1 + std::abs(a[i])));
}

TEST(ParticleRhs, AntisymmetricAndMomentumFree) {
  const ParticleEnsemble e = init_particles(narrow_parabola(), 64);
  const std::vector<double> v = particle_rhs(e, InteractionKernel(), 0.002);
  double sum = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_NEAR(v[i], -v[v.size() - 1 - i], 1e-9 * (1 + std::abs(v[i]))) << i;
    sum += v[i];
    scale += std::abs(v[i]);
  }
  EXPECT_LT(std::abs(sum), 1e-12 * scale);
}

TEST(ParticleRhs, RejectsUnorderedPositions) {
  EXPECT_THROW(particle_rhs(ParticleEnsemble::from_positions({0.0, 0.0}), InteractionKernel(), 0.1),
               std::invalid_argument);
  EXPECT_THROW(particle_rhs(ParticleEnsemble::from_positions({1.0, 0.0, 2.0}), InteractionKernel(), 0.1),
               std::invalid_argument);
}

TEST(Rk23Step, ZeroVelocityFieldLeavesPositions) {
  // Two far-apart particles at eps = 0: G' underflows to exactly zero.
  const ParticleEnsemble e = ParticleEnsemble::from_positions({-100.0, 100.0});
  const ParticleStepResult r = rk23_step(e, InteractionKernel(), 0.0, 0.5, Rk23Options{});
  EXPECT_TRUE(r.accepted);
  EXPECT_EQ(r.error, 0.0);
  EXPECT_EQ(r.ensemble.positions, e.positions);
  EXPECT_EQ(r.ensemble.time, 0.5);
}

TEST(Rk23Step, MatchesFineEulerOracle) {
  const InteractionKernel g;
  const ParticleEnsemble e = init_particles(narrow_parabola(), 9);
  const double eps = 0.002, dt = 1e-3;
  Rk23Options opt;
  opt.tol_abs = opt.tol_rel = 1.0;
  const ParticleStepResult r = rk23_step(e, g, eps, dt, opt);
  ASSERT_TRUE(r.accepted);

  std::vector<double> x = e.positions;
  const int sub = 20000;
  for (int s = 0; s < sub; ++s) {
    const std::vector<double> v = velocities_ref(x, eps, 1.0);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += dt / sub * v[i];
  }
  const std::vector<double> v0 = velocities_ref(e.positions, eps, 1.0);
  double vmax = 0.0;
  for (double v : v0) vmax = std::max(vmax, std::abs(v));
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(r.ensemble.positions[i], x[i], 1e-2 * vmax * dt) << i;
  }
}

TEST(Rk23Step, RejectsLargeStepsAndCrossings) {
  const ParticleEnsemble e = init_particles(narrow_parabola(), 20);
  const ParticleStepResult r = rk23_step(e, InteractionKernel(), 0.002, 10.0, Rk23Options{});
  EXPECT_FALSE(r.accepted);
  EXPECT_LT(r.dt_next, 10.0);
  EXPECT_EQ(r.ensemble.positions, e.positions);
  EXPECT_THROW(rk23_step(e, InteractionKernel(), 0.002, 0.0, Rk23Options{}), std::invalid_argument);
}

TEST(ParticleRun, ConservesCenterAndOrderAndConvergesWithTolerance) {
  const InteractionKernel g;
  const GridDensity rho0 = build_initial({Parabola{9.0 / 8.0, 9.0 / 4.0}, 0.3, true}, -2.0, 2.0, 0.01);
  const auto run_tol = [&](double tol) {
    ParticleOptions opt;
    opt.integrator.tol_abs = opt.integrator.tol_rel = tol;
    opt.row_dt = 0.1;
    return run_particles(rho0, 30, g, 0.5, 1.0, std::vector<double>{0.5}, opt);
  };
  const ParticleRun ref = run_tol(1e-12);
  const ParticleRun loose = run_tol(1e-4);
  const ParticleRun tight = run_tol(1e-8);
  const auto err = [&](const ParticleRun& r) {
    double m = 0.0;
    for (std::size_t i = 0; i < 30; ++i) m = std::max(m, std::abs(r.final_state.positions[i] - ref.final_state.positions[i]));
    return m;
  };
  EXPECT_LT(err(tight), err(loose));
  EXPECT_LT(err(tight), 1e-6);

  const double c0 = ensemble_center_of_mass(init_particles(rho0, 30));
  for (const ParticleRow& row : ref.rows) {
    EXPECT_NEAR(row.center, c0, 1e-10 * (1 + row.t));
    EXPECT_GT(row.min_gap, 0.0);
  }
  ASSERT_EQ(ref.rows.size(), 11u);
  EXPECT_NEAR(ref.rows.back().t, 1.0, 1e-12);
  EXPECT_EQ(ref.snapshots.size(), 3u);
  EXPECT_TRUE(strictly_ordered(ref.final_state.positions));
}

TEST(Reconstruction, UniformSpacingAndUnitMass) {
  std::vector<double> x(11);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.1 * static_cast<double>(i);
  const ParticleDensity d = reconstruct_density(ParticleEnsemble::from_positions(x));
  for (double v : d.values) EXPECT_NEAR(v, 1.0, 1e-12);
  EXPECT_NEAR(d.mass(), 1.0, 1e-14);

  const ParticleDensity two = reconstruct_density(ParticleEnsemble::from_positions({-0.4, 0.4}));
  EXPECT_NEAR(two.values[0], 1.0 / 0.8, 1e-15);

  const ParticleEnsemble e = init_particles(narrow_parabola(), 50);
  const ParticleDensity p = reconstruct_density(e);
  EXPECT_NEAR(p.mass(), 1.0, 1e-14);
  const GridDensity g = resample(p, UniformGrid::from_domain(-0.1, 0.1, 1e-3));
  EXPECT_NEAR(mass(g), 1.0, 1e-12);
  EXPECT_THROW(reconstruct_density(ParticleEnsemble::from_positions({1.0, 0.0})), std::invalid_argument);
}

TEST(Reconstruction, QuantileHitsParticles) {
  const ParticleEnsemble e = init_particles(narrow_parabola(), 21);
  const PiecewiseQuantile u = reconstruct_quantile(e);
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_NEAR(u(static_cast<double>(i) / 20.0), e.positions[i], 1e-12);
}
