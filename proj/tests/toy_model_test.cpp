// SPDX-FileCopyrightText: 2026 aggdiff authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "aggdiff/toy_model.hpp"

using namespace aggdiff;

namespace {

// eps = 16 x^3 exp(-4 x^2) / sqrt(pi) for the unit Gaussian, written by hand.
double balance_ref(double x) { return 16.0 * x * x * x * std::exp(-4.0 * x * x) / std::sqrt(std::numbers::pi); }

// Plain bisection for balance_ref(x) = eps on [lo, hi].
double root_ref(double eps, double lo, double hi) {
  const double slo = balance_ref(lo) - eps;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if ((balance_ref(mid) - eps > 0) == (slo > 0)) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

const double kFoldX = std::sqrt(3.0 / 8.0);
const double kFoldEps = 16.0 * std::pow(3.0 / 8.0, 1.5) * std::exp(-1.5) / std::sqrt(std::numbers::pi);

ToyProblem toy(double eps) { return ToyProblem{eps, InteractionKernel()}; }

}  // namespace

TEST(ToyModel, RhsAndBalance) {
  const ToyProblem p = toy(0.1);
  for (double x : {0.1, 0.5, 2.0}) {
    EXPECT_NEAR(toy_rhs(p, x), (0.1 - balance_ref(x)) / (8.0 * x * x), 1e-15);
    EXPECT_NEAR(toy_balance(p.kernel, x), balance_ref(x), 1e-15);
    const double h = 1e-6;
    EXPECT_NEAR(toy_rhs_slope(p, x), (toy_rhs(p, x + h) - toy_rhs(p, x - h)) / (2 * h), 1e-6 * (1 + 1 / (x * x * x)));
  }
  EXPECT_THROW(toy_rhs(p, 0.0), std::domain_error);
  EXPECT_THROW(toy_rhs(p, -1.0), std::domain_error);
}

TEST(ToyModel, FoldPointClosedForm) {
  const FoldPoint f = fold_point(InteractionKernel());
  EXPECT_NEAR(f.x, kFoldX, 1e-7);
  EXPECT_NEAR(f.epsilon, kFoldEps, 1e-13);
  EXPECT_NEAR(f.epsilon, 0.46254098941130783, 1e-13);
}

TEST(ToyModel, EquilibriaMatchIndependentBisection) {
  for (double eps : {0.01, 0.1, 0.3, 0.4, 0.46}) {
    const std::vector<Equilibrium> eq = find_equilibria(toy(eps));
    ASSERT_EQ(eq.size(), 2u) << eps;
    EXPECT_NEAR(eq[0].x, root_ref(eps, 1e-6, kFoldX), 1e-9) << eps;
    EXPECT_NEAR(eq[1].x, root_ref(eps, kFoldX, 50.0), 1e-9) << eps;
    EXPECT_EQ(eq[0].stability, Stability::stable);
    EXPECT_EQ(eq[1].stability, Stability::unstable);
    EXPECT_LT(toy_rhs_slope(toy(eps), eq[0].x), 0.0);
    EXPECT_GT(toy_rhs_slope(toy(eps), eq[1].x), 0.0);
  }
}

TEST(ToyModel, KnownEquilibriaAtSmallEpsilon) {
  const ToyEquilibriaRow r = equilibria_row(toy(0.1));
  ASSERT_TRUE(r.a && r.b);
  EXPECT_NEAR(*r.a, 0.24084704204857049, 1e-9);
  EXPECT_NEAR(*r.b, 1.091496417365752, 1e-9);
}

TEST(ToyModel, EquilibriumCountAcrossFold) {
  EXPECT_EQ(find_equilibria(toy(0.40)).size(), 2u);
  const std::vector<Equilibrium> at_fold = find_equilibria(toy(fold_point(InteractionKernel()).epsilon));
  ASSERT_EQ(at_fold.size(), 1u);
  EXPECT_EQ(at_fold[0].stability, Stability::semi_stable);
  EXPECT_NEAR(at_fold[0].x, kFoldX, 1e-6);
  EXPECT_TRUE(find_equilibria(toy(0.48)).empty());
  const ToyEquilibriaRow past = equilibria_row(toy(0.48));
  EXPECT_FALSE(past.a.has_value());
  EXPECT_FALSE(past.b.has_value());
}

TEST(ToyModel, TrajectoriesFollowTheBasins) {
  const ToyProblem p = toy(0.1);
  const std::vector<Equilibrium> eq = find_equilibria(p);
  const double a = eq[0].x, b = eq[1].x;

  const ToyTrajectory in = integrate_toy(p, 0.8, 500.0);
  EXPECT_NEAR(in.x.back(), a, 1e-4);
  EXPECT_EQ(classify_basin(p, 0.8), Basin::converges_to_a);
  EXPECT_EQ(in.t.front(), 0.0);
  EXPECT_EQ(in.t.back(), 500.0);

  const ToyTrajectory below = integrate_toy(p, 0.05, 200.0);
  EXPECT_NEAR(below.x.back(), a, 1e-4);

  const ToyTrajectory out = integrate_toy(p, 1.2, 200.0);
  EXPECT_GT(out.x.back(), 2.0);
  EXPECT_EQ(classify_basin(p, 1.2), Basin::diverges);
  // Beyond b the pair separates monotonically.
  for (std::size_t i = 1; i < out.x.size(); ++i) EXPECT_GT(out.x[i], out.x[i - 1]);
  EXPECT_EQ(classify_basin(p, b), Basin::on_separatrix);
  EXPECT_EQ(classify_basin(toy(0.48), 0.3), Basin::diverges);
}

TEST(ToyModel, MonotoneApproachToStableEquilibrium) {
  const ToyProblem p = toy(0.1);
  Rk23Options tight;
  tight.tol_abs = tight.tol_rel = 1e-12;
  const ToyTrajectory down = integrate_toy(p, 1.0, 100.0, 1.0, tight);
  for (std::size_t i = 1; i < down.x.size(); ++i) EXPECT_LE(down.x[i], down.x[i - 1] + 1e-11) << i;
  const ToyTrajectory up = integrate_toy(p, 0.1, 100.0, 1.0, tight);
  for (std::size_t i = 1; i < up.x.size(); ++i) EXPECT_GE(up.x[i], up.x[i - 1] - 1e-11) << i;
}

TEST(ToyModel, RejectsBadInput) {
  EXPECT_THROW(find_equilibria(toy(0.0)), std::invalid_argument);
  EXPECT_THROW(integrate_toy(toy(0.1), -0.5, 1.0), std::domain_error);
  EXPECT_THROW(classify_basin(toy(0.1), 0.0), std::domain_error);
  EXPECT_EQ(to_string(Basin::converges_to_a), "converges_to_a");
  EXPECT_EQ(to_string(Stability::semi_stable), "semi_stable");
}
