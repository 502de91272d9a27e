// SPDX-License-Identifier: Apache-2.0

#include "clipada/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "clipada/errors.hpp"

namespace clipada {

namespace {

void require_finite_grad(std::span<const double> g) {
  for (double v : g) {
    if (!std::isfinite(v)) throw PoisonedState("non-finite stochastic gradient");
  }
}

// Clipped copy of the gradient in a per-thread buffer.
std::span<const double> prepared_gradient(const OptimizerConfig& config, std::span<const double> grad) {
  require_finite_grad(grad);
  if (!config.clip) return grad;
  thread_local std::vector<double> scratch;
  scratch.assign(grad.begin(), grad.end());
  apply_clip_inplace(scratch, *config.clip);
  return scratch;
}

void commit_iterate(OptimizerState& state, const std::vector<double>& x_next) {
  for (double v : x_next) {
    if (!std::isfinite(v)) throw PoisonedState("non-finite iterate");
  }
  state.x = x_next;
}

}  // namespace

std::string to_string(Family family) {
  switch (family) {
    case Family::adagrad_norm:
      return "adagrad_norm";
    case Family::adam:
      return "adam";
    case Family::sgd:
      return "sgd";
  }
  return "unknown";
}

void OptimizerConfig::validate(std::size_t dim) const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be positive");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidArgument("eta must be >= 0");
  if (b_init.empty()) throw InvalidArgument("b_init must not be empty");
  for (double b : b_init) {
    if (!(b > 0.0) || !std::isfinite(b)) throw InvalidArgument("b_init must be positive");
  }
  if (family != Family::adam && b_init.size() != 1) {
    throw InvalidArgument("the AdaGrad-Norm and SGD families take a scalar b_init");
  }
  if (family == Family::adam && b_init.size() != 1 && b_init.size() != dim) {
    throw InvalidArgument("per-coordinate b_init must match the problem dimension");
  }
  if (family == Family::sgd && delay) throw InvalidArgument("delay has no meaning for SGD");
  if (!(beta1 >= 0.0 && beta1 <= 1.0) || !(beta2 >= 0.0 && beta2 <= 1.0)) {
    throw InvalidArgument("beta1 and beta2 must lie in [0, 1]");
  }
  if (bias_correction) {
    if (family != Family::adam) throw InvalidArgument("bias correction applies to the Adam family only");
    if (delay) throw InvalidArgument("bias correction is not defined for delayed Adam");
    if (beta1 >= 1.0 || beta2 >= 1.0) throw InvalidArgument("bias correction needs beta1, beta2 < 1");
  }
  if (clip) clip->validate(dim);
}

namespace presets {

namespace {

OptimizerConfig adagrad_base(double gamma, double b_init, bool delay, double eta) {
  OptimizerConfig c;
  c.family = Family::adagrad_norm;
  c.gamma = gamma;
  c.delay = delay;
  c.eta = eta;
  c.b_init = {b_init};
  return c;
}

OptimizerConfig clipped(OptimizerConfig c, double level) {
  c.clip = ClipSpec{ClipMode::global, level, {}};
  return c;
}

}  // namespace

OptimizerConfig adagrad(double gamma, double b_init) { return adagrad_base(gamma, b_init, false, 1.0); }
OptimizerConfig adagradd(double gamma, double b_init) { return adagrad_base(gamma, b_init, true, 1.0); }
OptimizerConfig radagrad(double gamma, double b_init, double eta) {
  return adagrad_base(gamma, b_init, false, eta);
}
OptimizerConfig radagradd(double gamma, double b_init, double eta) {
  return adagrad_base(gamma, b_init, true, eta);
}
OptimizerConfig clip_adagrad(double gamma, double b_init, double level) {
  return clipped(adagrad(gamma, b_init), level);
}
OptimizerConfig clip_adagradd(double gamma, double b_init, double level) {
  return clipped(adagradd(gamma, b_init), level);
}
OptimizerConfig clip_radagrad(double gamma, double b_init, double level, double eta) {
  return clipped(radagrad(gamma, b_init, eta), level);
}
OptimizerConfig clip_radagradd(double gamma, double b_init, double level, double eta) {
  return clipped(radagradd(gamma, b_init, eta), level);
}

OptimizerConfig sgd(double gamma) {
  OptimizerConfig c;
  c.family = Family::sgd;
  c.gamma = gamma;
  return c;
}

OptimizerConfig clip_sgd(double gamma, double level) { return clipped(sgd(gamma), level); }

OptimizerConfig adam(double gamma, double beta1, double beta2, double b_init) {
  OptimizerConfig c;
  c.family = Family::adam;
  c.gamma = gamma;
  c.beta1 = beta1;
  c.beta2 = beta2;
  c.b_init = {b_init};
  c.bias_correction = true;
  return c;
}

OptimizerConfig clip_adam(double gamma, double beta1, double beta2, double b_init, ClipSpec clip) {
  OptimizerConfig c = adam(gamma, beta1, beta2, b_init);
  c.clip = std::move(clip);
  return c;
}

OptimizerConfig clip_radamd(double gamma, double beta1, double beta2, double b_init, ClipSpec clip, double eta) {
  OptimizerConfig c = adam(gamma, beta1, beta2, b_init);
  c.bias_correction = false;
  c.delay = true;
  c.eta = eta;
  c.clip = std::move(clip);
  return c;
}

const std::vector<std::string>& names() {
  static const std::vector<std::string> kNames = {
      "adagrad",   "adagradd",      "radagrad",      "radagradd",     "clip_adagrad",
      "clip_adagradd", "clip_radagrad", "clip_radagradd", "sgd",         "clip_sgd",
      "adam",      "clip_adam",     "radamd",        "clip_radamd"};
  return kNames;
}

std::optional<OptimizerConfig> by_name(const std::string& name, double gamma, double b_init, double level) {
  const double eta = gamma * gamma;
  const ClipSpec global{ClipMode::global, level, {}};
  if (name == "adagrad") return adagrad(gamma, b_init);
  if (name == "adagradd") return adagradd(gamma, b_init);
  if (name == "radagrad") return radagrad(gamma, b_init, eta);
  if (name == "radagradd") return radagradd(gamma, b_init, eta);
  if (name == "clip_adagrad") return clip_adagrad(gamma, b_init, level);
  if (name == "clip_adagradd") return clip_adagradd(gamma, b_init, level);
  if (name == "clip_radagrad") return clip_radagrad(gamma, b_init, level, eta);
  if (name == "clip_radagradd") return clip_radagradd(gamma, b_init, level, eta);
  if (name == "sgd") return sgd(gamma);
  if (name == "clip_sgd") return clip_sgd(gamma, level);
  if (name == "adam") return adam(gamma, 0.9, 0.999, b_init);
  if (name == "clip_adam") return clip_adam(gamma, 0.9, 0.999, b_init, global);
  if (name == "radamd") {
    OptimizerConfig c = clip_radamd(gamma, 0.9, 0.999, b_init, global, eta);
    c.clip.reset();
    return c;
  }
  if (name == "clip_radamd") return clip_radamd(gamma, 0.9, 0.999, b_init, global, eta);
  return std::nullopt;
}

}  // namespace presets

double OptimizerState::accumulator() const {
  if (b.empty()) return 1.0;
  return *std::min_element(b.begin(), b.end());
}

OptimizerState init_state(const OptimizerConfig& config, std::vector<double> x0) {
  OptimizerState s;
  const std::size_t d = x0.size();
  s.x = std::move(x0);
  switch (config.family) {
    case Family::adagrad_norm:
      s.b = {config.b_init.at(0)};
      break;
    case Family::adam:
      s.b = config.b_init.size() == 1 ? std::vector<double>(d, config.b_init[0]) : config.b_init;
      s.m.assign(d, 0.0);
      break;
    case Family::sgd:
      break;
  }
  return s;
}

void step_adagrad_family(OptimizerState& state, const OptimizerConfig& config,
                         std::span<const double> stochastic_grad) {
  const auto g = prepared_gradient(config, stochastic_grad);
  double norm_sq = 0.0;
  for (double v : g) norm_sq += v * v;

  const double b = state.b[0];
  const double b_next = std::sqrt(b * b + config.eta * norm_sq);
  // Delay divides by the accumulator from before this gradient.
  const double divisor = config.delay ? b : b_next;
  if (!std::isfinite(b_next) || !(divisor > 0.0)) throw PoisonedState("non-finite accumulator");

  const double stepsize = config.gamma / divisor;
  std::vector<double> x_next(state.x.size());
  for (std::size_t i = 0; i < x_next.size(); ++i) x_next[i] = state.x[i] - stepsize * g[i];
  commit_iterate(state, x_next);
  state.b[0] = b_next;
  ++state.t;
}

void step_adam_family(OptimizerState& state, const OptimizerConfig& config,
                      std::span<const double> stochastic_grad) {
  const auto g = prepared_gradient(config, stochastic_grad);
  const std::size_t d = state.x.size();
  const bool correct = config.bias_correction && !config.delay;
  const double m_scale = correct ? 1.0 - std::pow(config.beta1, static_cast<double>(state.t + 1)) : 1.0;
  const double b_scale = correct ? std::sqrt(1.0 - std::pow(config.beta2, static_cast<double>(state.t + 1))) : 1.0;

  std::vector<double> m_next(d), b_next(d), x_next(d);
  for (std::size_t i = 0; i < d; ++i) {
    m_next[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g[i];
    b_next[i] = std::sqrt(config.beta2 * state.b[i] * state.b[i] + config.eta * (1.0 - config.beta2) * g[i] * g[i]);
    double divisor = config.delay ? state.b[i] : b_next[i];
    double momentum = m_next[i];
    if (correct) {
      momentum /= m_scale;
      divisor /= b_scale;
    }
    if (!std::isfinite(b_next[i]) || !(divisor > 0.0)) throw PoisonedState("zero or non-finite accumulator");
    x_next[i] = state.x[i] - (config.gamma / divisor) * momentum;
  }
  commit_iterate(state, x_next);
  state.m = std::move(m_next);
  state.b = std::move(b_next);
  ++state.t;
}

void step_sgd(OptimizerState& state, const OptimizerConfig& config, std::span<const double> stochastic_grad) {
  const auto g = prepared_gradient(config, stochastic_grad);
  std::vector<double> x_next(state.x.size());
  for (std::size_t i = 0; i < x_next.size(); ++i) x_next[i] = state.x[i] - config.gamma * g[i];
  commit_iterate(state, x_next);
  ++state.t;
}

void step(OptimizerState& state, const OptimizerConfig& config, std::span<const double> stochastic_grad) {
  if (stochastic_grad.size() != state.x.size()) throw InvalidArgument("gradient dimension mismatch");
  switch (config.family) {
    case Family::adagrad_norm:
      step_adagrad_family(state, config, stochastic_grad);
      return;
    case Family::adam:
      step_adam_family(state, config, stochastic_grad);
      return;
    case Family::sgd:
      step_sgd(state, config, stochastic_grad);
      return;
  }
}

namespace {

StepRecord make_record(const Objective& f, std::int64_t t, const OptimizerState& state,
                       std::span<const double> exact_grad) {
  StepRecord r;
  r.step = t;
  r.suboptimality = f.value(state.x) - f.min_value;
  double dist = 0.0;
  for (std::size_t i = 0; i < state.x.size(); ++i) {
    const double diff = state.x[i] - f.minimizer[i];
    dist += diff * diff;
  }
  r.squared_distance = dist;
  double gn = 0.0;
  for (double v : exact_grad) gn += v * v;
  r.grad_norm_sq = gn;
  r.accumulator = state.accumulator();
  return r;
}

}  // namespace

Trajectory run(const StochasticProblem& problem, const OptimizerConfig& config, std::vector<double> x0,
               std::int64_t steps, Rng& rng, const RunOptions& options) {
  const std::size_t d = problem.dim();
  if (steps < 1) throw InvalidArgument("a run needs at least one step");
  if (x0.size() != d) throw InvalidArgument("starting point dimension mismatch");
  if (options.record_every < 1) throw InvalidArgument("record_every must be >= 1");
  for (double v : x0) {
    if (!std::isfinite(v)) throw InvalidArgument("starting point must be finite");
  }
  config.validate(d);

  Trajectory traj;
  traj.dim = d;
  const auto expected = static_cast<std::size_t>(steps / options.record_every + 2);
  traj.records.reserve(expected);
  if (options.keep_iterates) traj.iterates.reserve(expected * d);

  auto record = [&](std::int64_t t, const OptimizerState& state, std::span<const double> grad) {
    traj.records.push_back(make_record(problem.objective, t, state, grad));
    if (options.keep_iterates) traj.iterates.insert(traj.iterates.end(), state.x.begin(), state.x.end());
  };

  OptimizerState state = init_state(config, std::move(x0));
  GradientSample sample;
  for (std::int64_t t = 0; t < steps; ++t) {
    problem.gradient(state.x, t, rng, sample);
    if (t % options.record_every == 0) record(t, state, sample.exact);
    if (options.observer) options.observer(t, sample);
    try {
      step(state, config, sample.stochastic);
    } catch (const PoisonedState& e) {
      traj.failed = true;
      traj.failed_at = t;
      traj.failure_reason = e.what();
      return traj;
    }
  }
  std::vector<double> grad(d);
  problem.objective.gradient(state.x, grad);
  record(steps, state, grad);
  return traj;
}

}  // namespace clipada
