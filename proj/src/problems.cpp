// SPDX-License-Identifier: Apache-2.0

#include "clipada/problems.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "clipada/errors.hpp"

namespace clipada {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be finite");
}

void require_nu(double nu) {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw InvalidArgument("huber threshold nu must be positive");
}

}  // namespace

double huber_value(double x, double nu) {
  require_finite(x, "x");
  require_nu(nu);
  const double ax = std::abs(x);
  if (ax <= nu) return 0.5 * x * x;
  return nu * (ax - 0.5 * nu);
}

double huber_grad(double x, double nu) {
  require_finite(x, "x");
  require_nu(nu);
  if (std::abs(x) <= nu) return x;
  return x > 0.0 ? nu : -nu;
}

double quadratic_grad(double x) {
  require_finite(x, "x");
  return x;
}

Objective make_quadratic(std::size_t dim) {
  if (dim == 0) throw InvalidArgument("quadratic dimension must be positive");
  Objective f;
  f.name = "quadratic";
  f.dim = dim;
  f.value = [](std::span<const double> x) {
    double s = 0.0;
    for (double xi : x) s += xi * xi;
    return 0.5 * s;
  };
  f.gradient = [](std::span<const double> x, std::span<double> g) {
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i];
  };
  f.smoothness = 1.0;
  f.minimizer.assign(dim, 0.0);
  f.min_value = 0.0;
  return f;
}

Objective make_huber(double nu) {
  require_nu(nu);
  Objective f;
  f.name = "huber";
  f.dim = 1;
  f.value = [nu](std::span<const double> x) { return huber_value(x[0], nu); };
  f.gradient = [nu](std::span<const double> x, std::span<double> g) { g[0] = huber_grad(x[0], nu); };
  f.smoothness = 1.0;
  f.minimizer = {0.0};
  f.min_value = 0.0;
  return f;
}

double heavy_tail_from_uniform(double u) {
  if (!(u > 0.0 && u < 1.0)) throw InvalidArgument("uniform draw must lie in (0, 1)");
  // P{|xi| > t} = (1 + t)^{-3/2}.
  const double tail = 2.0 * std::min(u, 1.0 - u);
  const double magnitude = std::pow(tail, -2.0 / 3.0) - 1.0;
  return u > 0.5 ? magnitude : -magnitude;
}

double heavy_tail_sample(Rng& rng) { return heavy_tail_from_uniform(rng.uniform_open()); }

double three_point_from_uniform(double amplitude, double u) {
  if (!(amplitude >= 1.0) || !std::isfinite(amplitude)) {
    throw InvalidArgument("three-point amplitude must be finite and >= 1");
  }
  const double side = 1.0 / (2.0 * amplitude * amplitude);
  if (u < side) return -amplitude;
  if (u > 1.0 - side) return amplitude;
  return 0.0;
}

double three_point_sample(double amplitude, Rng& rng) {
  return three_point_from_uniform(amplitude, rng.uniform_open());
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::none:
      return "none";
    case NoiseKind::heavy_tail_pdf:
      return "heavy_tail_pdf";
    case NoiseKind::three_point_first_step:
      return "three_point_first_step";
    case NoiseKind::three_point_last_step:
      return "three_point_last_step";
  }
  return "unknown";
}

NoiseOracle NoiseOracle::none() { return NoiseOracle{}; }

NoiseOracle NoiseOracle::heavy_tail(double scale) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw InvalidArgument("noise scale must be >= 0");
  NoiseOracle o;
  o.kind_ = NoiseKind::heavy_tail_pdf;
  o.sigma_ = scale;
  o.active_ = scale > 0.0;
  return o;
}

NoiseOracle NoiseOracle::three_point(NoiseKind kind, double sigma, double amplitude, std::int64_t trigger) {
  if (kind != NoiseKind::three_point_first_step && kind != NoiseKind::three_point_last_step) {
    throw InvalidArgument("three_point requires a three-point kind");
  }
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
  if (!(amplitude >= 1.0)) throw ConstructionInfeasible("three-point amplitude below 1");
  if (trigger < 0) throw InvalidArgument("trigger step must be >= 0");
  NoiseOracle o;
  o.kind_ = kind;
  o.sigma_ = sigma;
  o.amplitude_ = amplitude;
  o.trigger_ = trigger;
  o.active_ = true;
  return o;
}

NoiseOracle NoiseOracle::inactive_last_step(std::int64_t trigger) {
  NoiseOracle o;
  o.kind_ = NoiseKind::three_point_last_step;
  o.trigger_ = trigger;
  o.active_ = false;
  return o;
}

void NoiseOracle::sample(std::int64_t step, Rng& rng, std::span<double> out) const {
  switch (kind_) {
    case NoiseKind::none:
      std::fill(out.begin(), out.end(), 0.0);
      return;
    case NoiseKind::heavy_tail_pdf:
      for (double& v : out) v = sigma_ * heavy_tail_sample(rng);
      return;
    case NoiseKind::three_point_first_step:
    case NoiseKind::three_point_last_step:
      std::fill(out.begin(), out.end(), 0.0);
      if (active_ && step == trigger_) {
        const double xi = three_point_sample(amplitude_, rng);
        out[0] = xi == 0.0 ? 0.0 : -sigma_ * xi;
      }
      return;
  }
}

double adagrad_adversarial_amplitude(double x0, double gamma, double nu, double sigma, std::int64_t steps) {
  if (!(gamma > 0.0 && nu > 0.0 && sigma > 0.0) || steps < 1) {
    throw InvalidArgument("adagrad construction needs positive gamma, nu, sigma and K >= 1");
  }
  if (!(x0 - 2.0 * gamma > gamma && gamma > nu)) {
    throw ConstructionInfeasible("adagrad construction needs x0 - 2 gamma > gamma > nu");
  }
  const double radius = x0 - nu - 2.0 * gamma;
  return (gamma * static_cast<double>(steps) * nu / radius + nu) / sigma;
}

NoiseOracle adagrad_adversarial_oracle(double x0, double gamma, double nu, double sigma, std::int64_t steps) {
  const double amplitude = adagrad_adversarial_amplitude(x0, gamma, nu, sigma, steps);
  if (!(amplitude >= 1.0)) {
    throw ConstructionInfeasible("adagrad construction yields amplitude A = " + std::to_string(amplitude) +
                                 " < 1");
  }
  return NoiseOracle::three_point(NoiseKind::three_point_first_step, sigma, amplitude, 0);
}

double adagradd_adversarial_amplitude(double nu, double accumulator, double gamma, double sigma) {
  if (!(nu > 0.0 && accumulator > 0.0 && gamma > 0.0 && sigma > 0.0)) {
    throw InvalidArgument("adagradd amplitude needs positive nu, b, gamma, sigma");
  }
  return std::max(1.0, 2.0 * nu * accumulator / (gamma * sigma));
}

NoiseOracle adagradd_adversarial_oracle(const Trajectory& reference, double gamma, double nu, double sigma,
                                        std::int64_t steps) {
  if (steps < 1) throw InvalidArgument("adagradd construction needs K >= 1");
  const auto last = reference.find(steps);
  const auto before = reference.find(steps - 1);
  if (reference.failed || last < 0 || before < 0 || !reference.has_iterates()) {
    throw InvalidArgument("reference trajectory must record steps K-1 and K with iterates");
  }
  const double x_hat = reference.iterate(static_cast<std::size_t>(last))[0];
  if (std::abs(x_hat) > nu) return NoiseOracle::inactive_last_step(steps - 1);
  const double b_prev = reference.records[static_cast<std::size_t>(before)].accumulator;
  const double amplitude = adagradd_adversarial_amplitude(nu, b_prev, gamma, sigma);
  return NoiseOracle::three_point(NoiseKind::three_point_last_step, sigma, amplitude, steps - 1);
}

void StochasticProblem::gradient(std::span<const double> x, std::int64_t step, Rng& rng,
                                 GradientSample& out) const {
  const std::size_t d = objective.dim;
  out.exact.resize(d);
  out.noise.resize(d);
  out.stochastic.resize(d);
  objective.gradient(x, out.exact);
  noise.sample(step, rng, out.noise);
  for (std::size_t i = 0; i < d; ++i) out.stochastic[i] = out.exact[i] + out.noise[i];
}

}  // namespace clipada
