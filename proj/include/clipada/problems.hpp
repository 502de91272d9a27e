// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "clipada/random.hpp"
#include "clipada/trajectory.hpp"

namespace clipada {

using Vector = std::vector<double>;

// Scalar building blocks.
double huber_value(double x, double nu);
double huber_grad(double x, double nu);
double quadratic_grad(double x);

/// Deterministic objective with known smoothness and minimizer.
struct Objective {
  std::string name;
  std::size_t dim = 1;
  std::function<double(std::span<const double>)> value;
  std::function<void(std::span<const double>, std::span<double>)> gradient;
  double smoothness = 1.0;
  Vector minimizer;
  double min_value = 0.0;
};

// f(x) = |x|^2 / 2 in `dim` dimensions.
Objective make_quadratic(std::size_t dim = 1);
// One-dimensional Huber loss with threshold nu.
Objective make_huber(double nu);

// Symmetric density p(t) = 3 / (4 (1 + |t|)^{5/2}), sampled by closed-form
// inverse CDF. Finite alpha-th moment exactly for alpha < 3/2.
double heavy_tail_from_uniform(double u);
double heavy_tail_sample(Rng& rng);

// {-A, 0, +A} with P{+-A} = 1/(2A^2): zero mean, unit second moment.
double three_point_from_uniform(double amplitude, double u);
double three_point_sample(double amplitude, Rng& rng);

enum class NoiseKind { none, heavy_tail_pdf, three_point_first_step, three_point_last_step };

std::string to_string(NoiseKind kind);

/// Additive gradient noise keyed on step index.
///
/// The three-point kinds follow the lower-bound constructions, where the
/// stochastic gradient is grad f(x_t) - sigma * xi_t; `sample` writes
/// -sigma * xi_t so callers can always add it. Random draws depend only on
/// the step index, never on the query point, so two optimizers sharing a
/// seed see the same noise sequence.
class NoiseOracle {
 public:
  NoiseOracle() = default;

  static NoiseOracle none();
  // Each coordinate is an independent heavy_tail_sample scaled by `scale`.
  static NoiseOracle heavy_tail(double scale = 1.0);
  // sigma * three-point(A) only at step `trigger`; zero elsewhere.
  static NoiseOracle three_point(NoiseKind kind, double sigma, double amplitude,
                                 std::int64_t trigger);
  // Same kind tag as three_point(last_step), but identically zero.
  static NoiseOracle inactive_last_step(std::int64_t trigger);

  NoiseKind kind() const { return kind_; }
  double sigma() const { return sigma_; }
  double amplitude() const { return amplitude_; }
  std::int64_t trigger_step() const { return trigger_; }
  bool active() const { return active_; }

  void sample(std::int64_t step, Rng& rng, std::span<double> out) const;

 private:
  NoiseKind kind_ = NoiseKind::none;
  double sigma_ = 0.0;
  double amplitude_ = 0.0;
  std::int64_t trigger_ = -1;
  bool active_ = false;
};

/// Amplitude of the first-step construction against AdaGrad:
/// A = (gamma K nu / R + nu) / sigma with R = x0 - nu - 2 gamma.
double adagrad_adversarial_amplitude(double x0, double gamma, double nu, double sigma,
                                     std::int64_t steps);

NoiseOracle adagrad_adversarial_oracle(double x0, double gamma, double nu, double sigma,
                                       std::int64_t steps);

/// Amplitude of the last-step construction: max{1, 2 nu b / (gamma sigma)}.
double adagradd_adversarial_amplitude(double nu, double accumulator, double gamma, double sigma);

// Two-pass construction against AdaGradD. `reference` is the zero-noise
// AdaGradD run of at least `steps` steps, with every step recorded, supplying
// x_hat_K and b_{K-1}.
NoiseOracle adagradd_adversarial_oracle(const Trajectory& reference, double gamma, double nu,
                                        double sigma, std::int64_t steps);

struct GradientSample {
  Vector exact;
  Vector noise;
  Vector stochastic;  // exact + noise, computed componentwise
};

struct StochasticProblem {
  Objective objective;
  NoiseOracle noise;

  std::size_t dim() const { return objective.dim; }
  void gradient(std::span<const double> x, std::int64_t step, Rng& rng, GradientSample& out) const;
};

}  // namespace clipada
