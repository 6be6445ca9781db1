// SPDX-FileCopyrightText: 2026 aggdiff authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace aggdiff {

inline constexpr double kInvSqrtPi = std::numbers::inv_sqrtpi;

/// G(x) = amplitude * exp(-(x/width)^2). The default is the unit-mass kernel
/// 1/sqrt(pi) * exp(-x^2).
struct GaussianForm {
  double amplitude = kInvSqrtPi;
  double width = 1.0;
};

/// User-supplied even C^2 kernel with closed-form derivatives.
struct CustomForm {
  std::string name = "custom";
  std::function<double(double)> value;
  std::function<double(double)> d1;
  std::function<double(double)> d2;
  std::optional<double> l1_norm;  // closed form if known
};

/// (c, [-sub_radius, sub_radius]) with G'' <= -c on the closed subinterval.
struct ConcavityBound {
  double lambda = 0.0;
  double sub_radius = 0.0;
  double c = 0.0;
};

/// Attractive interaction potential G together with the analytic quantities
/// the solvers and diagnostics consume. Immutable once built.
class InteractionKernel {
 public:
  InteractionKernel() : InteractionKernel(GaussianForm{}) {}

  explicit InteractionKernel(GaussianForm g) : form_(g) {
    if (!(g.amplitude > 0.0) || !(g.width > 0.0)) {
      throw std::invalid_argument("gaussian kernel: amplitude and width must be positive");
    }
    lambda_ = g.width / std::numbers::sqrt2;
  }

  explicit InteractionKernel(CustomForm c) : form_(std::move(c)) {
    const auto& f = std::get<CustomForm>(form_);
    if (!f.value || !f.d1 || !f.d2) {
      throw std::invalid_argument("custom kernel '" + f.name + "' needs value, d1 and d2");
    }
    lambda_ = bisect_concavity_radius();
  }

  static InteractionKernel gaussian(double amplitude = kInvSqrtPi, double width = 1.0) {
    return InteractionKernel(GaussianForm{amplitude, width});
  }

  bool is_gaussian() const { return std::holds_alternative<GaussianForm>(form_); }
  const GaussianForm* gaussian_form() const { return std::get_if<GaussianForm>(&form_); }

  std::string name() const {
    if (is_gaussian()) return "gaussian";
    return std::get<CustomForm>(form_).name;
  }

  double eval(double x) const {
    if (const auto* g = gaussian_form()) {
      const double s = x / g->width;
      return g->amplitude * std::exp(-s * s);
    }
    return std::get<CustomForm>(form_).value(x);
  }

  double operator()(double x) const { return eval(x); }

  double eval_d1(double x) const {
    if (const auto* g = gaussian_form()) {
      const double s = x / g->width;
      return -2.0 * g->amplitude * s / g->width * std::exp(-s * s);
    }
    return std::get<CustomForm>(form_).d1(x);
  }

  double eval_d2(double x) const {
    if (const auto* g = gaussian_form()) {
      const double s = x / g->width;
      return g->amplitude * (4.0 * s * s - 2.0) / (g->width * g->width) * std::exp(-s * s);
    }
    return std::get<CustomForm>(form_).d2(x);
  }

  /// G^(order)(x) for order in {0, 1, 2}.
  double derivative(int order, double x) const {
    switch (order) {
      case 0: return eval(x);
      case 1: return eval_d1(x);
      case 2: return eval_d2(x);
      default: throw std::invalid_argument("kernel derivative order must be 0, 1 or 2");
    }
  }

  /// Integral of G over the real line. Closed form when available,
  /// adaptive quadrature otherwise.
  double l1_norm() const {
    if (const auto* g = gaussian_form()) {
      return g->amplitude * g->width * std::sqrt(std::numbers::pi);
    }
    if (const auto& known = std::get<CustomForm>(form_).l1_norm) return *known;
    return l1_norm_quadrature();
  }

  /// Always takes the quadrature route: 2 * int_0^inf G, relative error <= 1e-10.
  double l1_norm_quadrature() const {
    using boost::math::quadrature::gauss_kronrod;
    double error = 0.0;
    const auto g = [this](double x) { return eval(x); };
    const double half = gauss_kronrod<double, 31>::integrate(
        g, 0.0, std::numeric_limits<double>::infinity(), 20, 1e-12, &error);
    if (!std::isfinite(half) || !std::isfinite(error) || error > 1e-10 * std::abs(half)) {
      throw std::domain_error("kernel '" + name() + "': L1 norm quadrature did not converge");
    }
    return 2.0 * half;
  }

  /// Largest r with G'' < 0 on (-r, r).
  double concavity_radius() const { return lambda_; }

  /// The constant c = min_{|x| <= sub_radius} (-G''(x)) for a closed
  /// subinterval strictly inside the concavity interval.
  ConcavityBound concavity_bound(double sub_radius) const {
    if (!(sub_radius >= 0.0) || !(sub_radius < lambda_)) {
      throw std::invalid_argument("concavity subinterval must satisfy 0 <= r < lambda");
    }
    ConcavityBound out{lambda_, sub_radius, 0.0};
    if (is_gaussian()) {
      // G'' is increasing on [0, lambda], so its max on [0, r] is at r.
      out.c = -eval_d2(sub_radius);
      return out;
    }
    constexpr int kSamples = 4001;
    double c = -eval_d2(0.0);
    for (int k = 1; k < kSamples; ++k) {
      const double x = sub_radius * k / (kSamples - 1);
      c = std::min(c, -eval_d2(x));
    }
    out.c = c;
    return out;
  }

 private:
  double bisect_concavity_radius() const {
    if (!(eval_d2(0.0) < 0.0)) {
      throw std::domain_error("kernel '" + name() + "' is not strictly concave at 0");
    }
    double lo = 0.0;
    double hi = 1e-3;
    while (eval_d2(hi) < 0.0) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e6) throw std::domain_error("kernel '" + name() + "': no inflection point found");
    }
    while (hi - lo > 1e-10) {
      const double mid = 0.5 * (lo + hi);
      (eval_d2(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  std::variant<GaussianForm, CustomForm> form_;
  double lambda_ = 0.0;
};

}  // namespace aggdiff
