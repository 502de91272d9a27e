// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clipada/clipping.hpp"
#include "clipada/problems.hpp"
#include "clipada/random.hpp"
#include "clipada/trajectory.hpp"

namespace clipada {

enum class Family { adagrad_norm, adam, sgd };

std::string to_string(Family family);

// A single parameterized engine covers every variant:
//
//   family  delay  clip  eta    name
//   ------  -----  ----  -----  -----------------------------
//   adagrad no     -     1      AdaGrad
//   adagrad yes    -     1      AdaGradD
//   adagrad *      set   free   Clip-(R)AdaGrad(D)
//   adagrad *      set   0      Clip-SGD with stepsize gamma/b_init
//   adam    *      *     free   (Clip-)(R)Adam(D)
struct OptimizerConfig {
  Family family = Family::adagrad_norm;
  double gamma = 1.0;
  bool delay = false;
  std::optional<ClipSpec> clip;
  double eta = 1.0;
  // Scalar (one entry) or per-coordinate (Adam family only).
  std::vector<double> b_init{1.0};
  double beta1 = 0.9;
  double beta2 = 0.999;
  bool bias_correction = false;

  void validate(std::size_t dim) const;
};

namespace presets {

OptimizerConfig adagrad(double gamma, double b_init);
OptimizerConfig adagradd(double gamma, double b_init);
OptimizerConfig radagrad(double gamma, double b_init, double eta);
OptimizerConfig radagradd(double gamma, double b_init, double eta);
OptimizerConfig clip_adagrad(double gamma, double b_init, double level);
OptimizerConfig clip_adagradd(double gamma, double b_init, double level);
OptimizerConfig clip_radagrad(double gamma, double b_init, double level, double eta);
OptimizerConfig clip_radagradd(double gamma, double b_init, double level, double eta);
OptimizerConfig sgd(double gamma);
OptimizerConfig clip_sgd(double gamma, double level);
OptimizerConfig adam(double gamma, double beta1, double beta2, double b_init);
OptimizerConfig clip_adam(double gamma, double beta1, double beta2, double b_init, ClipSpec clip);
OptimizerConfig clip_radamd(double gamma, double beta1, double beta2, double b_init, ClipSpec clip,
                            double eta);

// Looks up a preset by name (e.g. "clip_radagradd"); eta defaults to
// gamma^2 for reweighted variants. Returns nullopt for unknown names.
std::optional<OptimizerConfig> by_name(const std::string& name, double gamma, double b_init,
                                       double level);
const std::vector<std::string>& names();

}  // namespace presets

struct OptimizerState {
  std::vector<double> x;
  std::vector<double> b;  // one entry for the AdaGrad family
  std::vector<double> m;  // Adam family only
  std::int64_t t = 0;

  double accumulator() const;
};

OptimizerState init_state(const OptimizerConfig& config, std::vector<double> x0);

// One AdaGrad-Norm step with optional clipping, reweighting and delay.
// Throws PoisonedState on a non-finite gradient or result; `state` is left
// untouched in that case.
void step_adagrad_family(OptimizerState& state, const OptimizerConfig& config,
                         std::span<const double> stochastic_grad);
// Coordinate-wise Adam family with optional clip/reweight/delay and bias
// correction (undelayed only).
void step_adam_family(OptimizerState& state, const OptimizerConfig& config,
                      std::span<const double> stochastic_grad);
void step_sgd(OptimizerState& state, const OptimizerConfig& config,
              std::span<const double> stochastic_grad);

// Dispatches on config.family.
void step(OptimizerState& state, const OptimizerConfig& config, std::span<const double> stochastic_grad);

struct RunOptions {
  // Records steps divisible by this stride, plus the final step.
  std::int64_t record_every = 1;
  bool keep_iterates = true;
  // Called with every oracle answer before the step consumes it.
  std::function<void(std::int64_t step, const GradientSample& sample)> observer;
};

// Runs `steps` optimizer steps, recording x_0 .. x_steps. A poisoned step
// stops the run and yields a partial trajectory with `failed` set.
Trajectory run(const StochasticProblem& problem, const OptimizerConfig& config, std::vector<double> x0,
               std::int64_t steps, Rng& rng, const RunOptions& options = {});

}  // namespace clipada
