// SPDX-License-Identifier: Apache-2.0

#include "clipada/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>


#include "clipada/errors.hpp"

namespace clipada::theory {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

// 2 (sqrt(a + hi) - sqrt(a + lo)) without cancellation.
double twice_sqrt_gap(double a, double hi, double lo) {
  return 2.0 * (hi - lo) / (std::sqrt(a + hi) + std::sqrt(a + lo));
}

// Offset of the accumulator index: b^2 + (t + 1) nu^2 undelayed, b^2 + t nu^2
// delayed.
double offset(bool delayed) { return delayed ? 0.0 : 1.0; }

void check_theory_inputs(const TheoryInputs& in, const char* scale_name) {
  require(in.steps >= 1, "K must be at least 1");
  require(in.delta > 0.0 && in.delta <= 1.0, "delta must lie in (0, 1]");
  require(in.alpha > 1.0 && in.alpha <= 2.0, "alpha must lie in (1, 2]");
  require(in.smoothness > 0.0 && std::isfinite(in.smoothness), "L must be positive");
  require(in.sigma >= 0.0 && std::isfinite(in.sigma), "sigma must be >= 0");
  require(in.b0 > 0.0 && std::isfinite(in.b0), "b0 must be positive");
  require(in.scale > 0.0 && std::isfinite(in.scale), std::string(scale_name) + " must be positive");
}

int argmin(const std::array<double, 3>& terms) {
  return static_cast<int>(std::min_element(terms.begin(), terms.end()) - terms.begin());
}

}  // namespace

void HuberScenario::validate(bool /*delayed*/) const {
  const bool finite = std::isfinite(x0) && std::isfinite(gamma) && std::isfinite(nu) && std::isfinite(b);
  if (!finite || !(x0 > 0.0) || !(std::abs(x0) > gamma) || !(gamma > 0.0) || !(nu > 0.0) ||
      !(nu < x0 - gamma) || !(b > 0.0)) {
    throw ValidityError("huber scenario needs x0 > 0, |x0| > gamma > 0, 0 < nu < x0 - gamma, b > 0", -1);
  }
}

double huber_closed_form(const HuberScenario& s, std::int64_t steps, bool delayed) {
  s.validate(delayed);
  require(steps >= 0, "T must be >= 0");
  const double a0 = s.a0();
  const double shift = offset(delayed);
  double sum = 0.0;
  double x = s.x0;
  for (std::int64_t t = 0; t < steps; ++t) {
    if (t >= 1 && !(x > s.nu)) {
      throw ValidityError("iterate x_" + std::to_string(t) + " is not above nu", t);
    }
    sum += 1.0 / std::sqrt(a0 + static_cast<double>(t) + shift);
    x = s.x0 - s.gamma * sum;
  }
  return x;
}

Bracket huber_iterate_bounds(const HuberScenario& s, std::int64_t steps, bool delayed) {
  huber_closed_form(s, steps, delayed);
  if (steps == 0) return {s.x0, s.x0};
  const double a = s.a0();
  const double T = static_cast<double>(steps);
  if (delayed) {
    const double upper_sum = 1.0 / std::sqrt(a) + twice_sqrt_gap(a, T - 1.0, 0.0);
    const double lower_sum = twice_sqrt_gap(a, T, 0.0);
    return {s.x0 - s.gamma * upper_sum, s.x0 - s.gamma * lower_sum};
  }
  const double upper_sum = 1.0 / std::sqrt(1.0 + a) + twice_sqrt_gap(a, T, 1.0);
  const double lower_sum = twice_sqrt_gap(a, T + 1.0, 1.0);
  return {s.x0 - s.gamma * upper_sum, s.x0 - s.gamma * lower_sum};
}

double adagrad_iteration_threshold(const HuberScenario& s) {
  s.validate(false);
  const double d = s.x0 - s.nu - s.gamma;
  return (d * d + 4.0 * s.gamma * d * std::sqrt(s.a0() + 1.0)) / (4.0 * s.gamma * s.gamma) + 1.0;
}

double adagradd_iteration_threshold(const HuberScenario& s) {
  s.validate(true);
  if (!(s.b >= s.nu)) throw ValidityError("delayed threshold needs b0 >= nu", -1);
  const double d = s.x0 - s.nu - s.gamma;
  // The lower bracket ends in sqrt(a0 + T - 1), so solving it for T adds 1,
  // not 2; with +2 the bound fails at b0 = nu (e.g. x0 = 0.5, gamma = nu = 0.1).
  return (d * d + 4.0 * s.gamma * d * std::sqrt(s.a0())) / (4.0 * s.gamma * s.gamma) + 1.0;
}

AdagradLowerBound adagrad_lower_bound(double eps, double delta, double sigma, double gamma, double x0,
                                      double b_init) {
  require(eps > 0.0 && delta > 0.0 && delta <= 1.0 && sigma > 0.0 && gamma > 0.0 && b_init >= 0.0,
          "lower bound needs eps > 0, delta in (0, 1], sigma > 0, gamma > 0, b >= 0");
  AdagradLowerBound out;
  out.nu = std::sqrt(2.0 * eps);
  out.radius = x0 - out.nu - 2.0 * gamma;
  if (!(out.radius > 0.0)) throw ConstructionInfeasible("R = x0 - sqrt(2 eps) - 2 gamma must be positive");
  out.inverse_delta_term = (out.radius / gamma) * (sigma / (out.nu * std::sqrt(delta)) - 1.0);
  out.necessary_term = b_init * out.radius / (out.nu * gamma);
  out.value = std::max(out.inverse_delta_term, out.necessary_term);
  return out;
}

double adagrad_lower_bound_K(double eps, double delta, double sigma, double gamma, double x0, double b_init) {
  require(eps > 0.0 && delta > 0.0, "eps and delta must be positive");
  if (!(sigma / std::sqrt(eps * delta) >= 2.0)) {
    throw ConstructionInfeasible("construction needs sigma / sqrt(eps delta) >= 2");
  }
  return adagrad_lower_bound(eps, delta, sigma, gamma, x0, b_init).value;
}

double adagradd_lower_bound_K(double eps, double delta, double sigma, double x0, double nu, double gamma,
                              double b0) {
  require(eps > 0.0 && delta > 0.0 && delta <= 1.0 && sigma > 0.0 && nu > 0.0 && gamma > 0.0 && b0 > 0.0,
          "lower bound needs positive eps, sigma, nu, gamma, b0 and delta in (0, 1]");
  const double radius = x0 - nu - gamma;
  if (!(radius > 0.0)) throw ConstructionInfeasible("R = x0 - nu - gamma must be positive");
  const double scaled = sigma * radius / (eps * std::sqrt(delta));
  if (!(scaled >= 16.0 * b0 * b0)) {
    throw ConstructionInfeasible("construction needs sigma R / (eps sqrt(delta)) >= 16 b0^2");
  }
  return scaled / 16.0;
}

double log_factor(std::int64_t steps, double delta) {
  require(steps >= 0, "K must be >= 0");
  require(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
  return std::log(4.0 * (static_cast<double>(steps) + 1.0) / delta);
}

TheoryParams convex_params(const TheoryInputs& in) {
  check_theory_inputs(in, "R");
  const double A = log_factor(in.steps, in.delta);
  const double k1 = static_cast<double>(in.steps) + 1.0;
  const double a = in.alpha;
  const double R = in.scale;

  TheoryParams p;
  p.inputs = in;
  p.log_factor = A;
  p.gamma_terms[0] = in.b0 / (160.0 * in.smoothness * A);
  p.gamma_terms[1] = in.sigma == 0.0 ? kInf
                                     : R * in.b0 /
                                           (40.0 * std::pow(9.0, 1.0 / a) * in.sigma * std::pow(k1, 1.0 / a) *
                                            std::pow(A, (a - 1.0) / a));
  p.gamma_terms[2] = kInf;
  p.binding_term = argmin(p.gamma_terms);
  p.gamma = p.gamma_terms[p.binding_term];
  p.lambda = in.b0 * R / (40.0 * p.gamma * A);
  p.eta = (p.gamma * p.gamma) / (R * R);
  return p;
}

TheoryParams nonconvex_params(const TheoryInputs& in) {
  check_theory_inputs(in, "Delta");
  const double A = log_factor(in.steps, in.delta);
  const double k1 = static_cast<double>(in.steps) + 1.0;
  const double a = in.alpha;
  const double L = in.smoothness;
  const double gap = in.scale;
  const double k_pow = std::pow(k1, a / (3.0 * a - 2.0));

  TheoryParams p;
  p.inputs = in;
  p.log_factor = A;
  p.gamma_terms[0] = in.b0 / (80.0 * L * A);
  if (in.sigma == 0.0) {
    p.gamma_terms[1] = kInf;
    p.gamma_terms[2] = kInf;
  } else {
    p.gamma_terms[1] = std::pow(35.0, 1.0 / a) * in.b0 * std::sqrt(gap) /
                       (std::pow(432.0, 1.0 / a) * 20.0 * std::sqrt(L) * in.sigma * k_pow *
                        std::pow(A, (a - 1.0) / a));
    const double e = 2.0 * a - 1.0;
    p.gamma_terms[2] = in.b0 * std::pow(gap, a / e) /
                       (std::pow(4.0, (a + 1.0) / e) * std::pow(20.0, (2.0 * a - 2.0) / e) *
                        std::pow(in.sigma, 2.0 * a / e) * std::pow(L, (a - 1.0) / e) * k_pow *
                        std::pow(A, (2.0 * a - 2.0) / e));
  }
  p.binding_term = argmin(p.gamma_terms);
  p.gamma = p.gamma_terms[p.binding_term];
  // (K+1)^{(1-a)/(3a-2)} moved to the denominator with a positive exponent.
  p.lambda = in.b0 * std::sqrt(gap) /
             (p.gamma * 20.0 * std::sqrt(L) * A * std::pow(k1, (a - 1.0) / (3.0 * a - 2.0)));
  p.eta = L * (p.gamma * p.gamma) / gap;
  return p;
}

ClipEffectBounds clip_effect_bounds(double sigma, double alpha, double level) {
  require(sigma >= 0.0 && std::isfinite(sigma), "sigma must be >= 0");
  require(alpha > 1.0 && alpha <= 2.0, "alpha must lie in (1, 2]");
  require(level > 0.0 && std::isfinite(level), "clipping level must be positive");
  const double moment = std::pow(sigma, alpha);
  return {std::pow(2.0, alpha) * moment / std::pow(level, alpha - 1.0),
          18.0 * std::pow(level, 2.0 - alpha) * moment};
}

double heavy_tail_alpha_moment(double alpha) {
  require(alpha > 0.0 && alpha < 1.5, "the heavy-tail density has finite alpha-moments only for alpha < 1.5");
  // With u = t / (1 + t): 2 int_0^inf t^a 3 / (4 (1+t)^{5/2}) dt
  //                      = (3/2) int_0^1 u^a (1-u)^{1/2 - a} du = (3/2) B(a + 1, 3/2 - a).
  // Quadrature loses accuracy near a = 3/2, where the integrand is nearly 1/(1-u).
  return 1.5 * std::beta(alpha + 1.0, 1.5 - alpha);
}

double heavy_tail_sigma(double alpha) { return std::pow(heavy_tail_alpha_moment(alpha), 1.0 / alpha); }

}  // namespace clipada::theory
