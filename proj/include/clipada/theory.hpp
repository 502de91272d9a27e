// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>

namespace clipada::theory {

/// Deterministic AdaGrad(D) on the Huber loss started right of the kink.
///
/// `b` is b_{-1} for AdaGrad and b_0 for AdaGradD.
struct HuberScenario {
  double x0 = 0.0;
  double gamma = 0.0;
  double nu = 0.0;
  double b = 0.0;

  double a0() const { return (b * b) / (nu * nu); }

  // x0 > 0, |x0| > gamma, 0 < nu < x0 - gamma, b > 0; delayed also b >= nu.
  // Throws ValidityError (step -1).
  void validate(bool delayed) const;
};

// x_T predicted while every iterate x_1 .. x_{T-1} stays above nu:
//   undelayed  x0 - gamma nu sum_{t<T} 1 / sqrt(b^2 + (t+1) nu^2)
//   delayed    x0 - gamma nu sum_{t<T} 1 / sqrt(b^2 + t nu^2)
// Throws ValidityError carrying the first step whose iterate is <= nu.
double huber_closed_form(const HuberScenario& scenario, std::int64_t steps, bool delayed);

struct Bracket {
  double lower = 0.0;
  double upper = 0.0;
};

// Integral-comparison bracket around huber_closed_form. Both ends equal x0 at
// T = 0 (empty sum).
Bracket huber_iterate_bounds(const HuberScenario& scenario, std::int64_t steps, bool delayed);

// x_T > nu holds for every integer T strictly below these values.
double adagrad_iteration_threshold(const HuberScenario& scenario);
double adagradd_iteration_threshold(const HuberScenario& scenario);

struct AdagradLowerBound {
  double inverse_delta_term = 0.0;  // (R/gamma)(sigma/(nu sqrt(delta)) - 1)
  double necessary_term = 0.0;      // b_{-1} R / (nu gamma)
  double value = 0.0;               // max of the two
  double nu = 0.0;
  double radius = 0.0;
};

// Iterations AdaGrad needs before P{f(x_K) - f* >= eps} <= delta is possible
// under the first-step construction; nu = sqrt(2 eps), R = x0 - nu - 2 gamma.
AdagradLowerBound adagrad_lower_bound(double eps, double delta, double sigma, double gamma, double x0,
                                      double b_init);
double adagrad_lower_bound_K(double eps, double delta, double sigma, double gamma, double x0,
                             double b_init);

// sigma R / (16 eps sqrt(delta)) with R = x0 - nu - gamma.
double adagradd_lower_bound_K(double eps, double delta, double sigma, double x0, double nu, double gamma,
                              double b0);

struct TheoryInputs {
  std::int64_t steps = 0;  // K
  double delta = 0.0;
  double smoothness = 0.0;  // L
  double sigma = 0.0;
  double alpha = 2.0;
  double b0 = 0.0;
  double scale = 0.0;  // R (convex) or Delta (non-convex)
};

struct TheoryParams {
  double gamma = 0.0;
  double lambda = 0.0;
  double eta = 0.0;
  double log_factor = 0.0;  // ln(4 (K+1) / delta)
  // Stepsize candidates whose minimum is gamma; unused slots are +inf.
  std::array<double, 3> gamma_terms{};
  int binding_term = 0;
  TheoryInputs inputs;
};

double log_factor(std::int64_t steps, double delta);

// Clip-RAdaGradD parameters for smooth convex problems with R >= |x0 - x*|.
TheoryParams convex_params(const TheoryInputs& inputs);
// Clip-RAdaGradD parameters for smooth non-convex problems with
// Delta >= f(x0) - f*.
TheoryParams nonconvex_params(const TheoryInputs& inputs);

struct ClipEffectBounds {
  double bias = 0.0;           // 2^a sigma^a / lambda^(a-1)
  double second_moment = 0.0;  // 18 lambda^(2-a) sigma^a
};

ClipEffectBounds clip_effect_bounds(double sigma, double alpha, double level);

// E|xi|^alpha for the unit heavy-tail density, by tanh-sinh quadrature;
// requires 0 < alpha < 1.5.
double heavy_tail_alpha_moment(double alpha);
// (E|xi|^alpha)^(1/alpha): the sigma certifying the bounded-moment condition.
double heavy_tail_sigma(double alpha);

}  // namespace clipada::theory
