// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "clipada/clipping.hpp"
#include "clipada/errors.hpp"
#include "clipada/optimizers.hpp"
#include "clipada/problems.hpp"

namespace clipada {
namespace {

using V = std::vector<double>;

StochasticProblem heavy_quadratic(std::size_t dim, double scale = 1.0) {
  return {make_quadratic(dim), NoiseOracle::heavy_tail(scale)};
}

// Straight-line AdaGrad-Norm or AdaGradD on f = |x|^2/2 with unit heavy-tail
// noise, drawing from its own stream.
std::vector<V> straight_line_adagrad(V x, double gamma, double b, bool delayed, int steps, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<V> xs{x};
  V g(x.size());
  for (int t = 0; t < steps; ++t) {
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      g[i] = x[i] + heavy_tail_sample(rng);
      sq += g[i] * g[i];
    }
    const double b_new = std::sqrt(b * b + sq);
    const double step = gamma / (delayed ? b : b_new);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = x[i] - step * g[i];
    b = b_new;
    xs.push_back(x);
  }
  return xs;
}

// Straight-line Clip-SGD with stepsize gamma.
std::vector<V> straight_line_clip_sgd(V x, double gamma, double level, int steps, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<V> xs{x};
  V g(x.size());
  for (int t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] + heavy_tail_sample(rng);
    const auto c = clip_global(g, level);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = x[i] - gamma * c[i];
    xs.push_back(x);
  }
  return xs;
}

void expect_iterates(const Trajectory& traj, const std::vector<V>& xs) {
  ASSERT_FALSE(traj.failed);
  ASSERT_EQ(traj.records.size(), xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto it = traj.iterate(k);
    ASSERT_EQ(V(it.begin(), it.end()), xs[k]) << "step " << k;
  }
}

Trajectory engine_run(const StochasticProblem& p, const OptimizerConfig& c, V x0, int steps, std::uint64_t seed) {
  Rng rng(seed);
  return run(p, c, std::move(x0), steps, rng);
}

TEST(Adagrad, FirstStepExample) {
  auto config = presets::adagrad(1.0, 3.0);
  auto state = init_state(config, {2.0});
  const double g = 2.0;
  step(state, config, std::span<const double>(&g, 1));
  EXPECT_EQ(state.b[0], std::sqrt(13.0));
  EXPECT_NEAR(state.x[0], 1.4452998037747709, 1e-15);
  EXPECT_EQ(state.t, 1);
}

TEST(Adagrad, ClipSgdReductionExample) {
  auto config = presets::clip_radagrad(0.1, 1.0, 1.0, 0.0);
  auto state = init_state(config, {0.0, 0.0});
  const V g{3.0, 4.0};
  step(state, config, g);
  EXPECT_NEAR(state.x[0], -0.06, 1e-16);
  EXPECT_NEAR(state.x[1], -0.08, 1e-16);
  EXPECT_EQ(state.b[0], 1.0);
}

TEST(Adagrad, DelayDividesByPreviousAccumulator) {
  for (double g : {0.3, -5.0, 1e3}) {
    auto config = presets::adagradd(0.5, 2.0);
    auto state = init_state(config, {1.0});
    step(state, config, std::span<const double>(&g, 1));
    EXPECT_EQ(state.x[0], 1.0 - (0.5 / 2.0) * g);
    EXPECT_EQ(state.b[0], std::sqrt(4.0 + g * g));
  }
}

TEST(Adagrad, PoisonedGradientLeavesStateUntouched) {
  auto config = presets::adagrad(0.1, 1.0);
  auto state = init_state(config, {1.0});
  const double g = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(step(state, config, std::span<const double>(&g, 1)), PoisonedState);
  EXPECT_EQ(state.x[0], 1.0);
  EXPECT_EQ(state.b[0], 1.0);
  EXPECT_EQ(state.t, 0);
}

TEST(VariantLattice, PlainAdagradIsBitIdentical) {
  for (bool delayed : {false, true})
    for (std::size_t dim : {1u, 3u})
      for (double gamma : {1.0, 0.0625, 0.01})
        for (double b : {0.5, 3.0}) {
          const auto config = delayed ? presets::adagradd(gamma, b) : presets::adagrad(gamma, b);
          const V x0(dim, 2.0);
          const auto traj = engine_run(heavy_quadratic(dim), config, x0, 500, 42 + dim);
          expect_iterates(traj, straight_line_adagrad(x0, gamma, b, delayed, 500, 42 + dim));
        }
}

TEST(VariantLattice, ZeroEtaIsClipSgd) {
  for (bool delayed : {false, true})
    for (std::size_t dim : {1u, 2u})
      for (double b : {1.0, 3.0, 0.7})
        for (double level : {0.5, 2.0}) {
          const double gamma = 0.25;
          const auto config = delayed ? presets::clip_radagradd(gamma, b, level, 0.0)
                                      : presets::clip_radagrad(gamma, b, level, 0.0);
          const V x0(dim, 2.0);
          const auto traj = engine_run(heavy_quadratic(dim), config, x0, 500, 7);
          expect_iterates(traj, straight_line_clip_sgd(x0, gamma / b, level, 500, 7));
          expect_iterates(engine_run(heavy_quadratic(dim), presets::clip_sgd(gamma / b, level), x0, 500, 7),
                          straight_line_clip_sgd(x0, gamma / b, level, 500, 7));
        }
}

TEST(Run, ZeroNoiseContraction) {
  StochasticProblem p{make_quadratic(1), NoiseOracle::none()};
  const auto traj = engine_run(p, presets::clip_radagrad(1.0, 2.0, 100.0, 0.0), {2.0}, 40, 0);
  for (std::size_t t = 0; t <= 40; ++t) EXPECT_EQ(traj.iterate(t)[0], 2.0 * std::ldexp(1.0, -static_cast<int>(t)));
}

TEST(Run, RecordsStrideAndFinalStep) {
  const auto p = heavy_quadratic(1);
  Rng rng(1);
  RunOptions o;
  o.record_every = 10;
  const auto traj = run(p, presets::adagrad(0.1, 1.0), {2.0}, 95, rng, o);
  ASSERT_EQ(traj.records.size(), 11u);
  EXPECT_EQ(traj.records[9].step, 90);
  EXPECT_EQ(traj.final_record().step, 95);
  EXPECT_EQ(traj.find(50), 5);
  EXPECT_EQ(traj.find(51), -1);
}

TEST(Run, IdenticalSeedsAreBitIdentical) {
  const auto p = heavy_quadratic(2);
  const auto config = presets::clip_radagradd(0.0625, 3.0, 0.5, 0.0625 * 0.0625);
  const auto a = engine_run(p, config, {2.0, -1.0}, 2000, 9);
  const auto b = engine_run(p, config, {2.0, -1.0}, 2000, 9);
  const auto c = engine_run(p, config, {2.0, -1.0}, 2000, 10);
  ASSERT_EQ(a.iterates, b.iterates);
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_EQ(a.records[k].accumulator, b.records[k].accumulator);
    EXPECT_EQ(a.records[k].suboptimality, b.records[k].suboptimality);
  }
  EXPECT_NE(a.iterates, c.iterates);
}

TEST(Run, PoisonedRunIsFlaggedAndPartial) {
  // beta2 = 0 with a zero gradient sends the Adam accumulator to zero.
  StochasticProblem p{make_quadratic(1), NoiseOracle::none()};
  auto config = presets::adam(0.1, 0.0, 0.0, 1.0);
  config.bias_correction = false;
  const auto traj = engine_run(p, config, {0.0}, 10, 0);
  EXPECT_TRUE(traj.failed);
  EXPECT_EQ(traj.failed_at, 0);
  EXPECT_EQ(traj.records.size(), 1u);
  EXPECT_FALSE(traj.failure_reason.empty());
}

TEST(Run, NonFiniteOracleIsPoison) {
  Objective f = make_quadratic(1);
  f.gradient = [](std::span<const double> x, std::span<double> g) {
    g[0] = x[0] < 1.0 ? std::numeric_limits<double>::infinity() : x[0];
  };
  StochasticProblem p{f, NoiseOracle::none()};
  const auto traj = engine_run(p, presets::sgd(0.5), {2.0}, 10, 0);
  EXPECT_TRUE(traj.failed);
  EXPECT_EQ(traj.failed_at, 2);  // x: 2, 1, 0.5
}

class AccumulatorInvariants : public ::testing::TestWithParam<std::string> {};

TEST_P(AccumulatorInvariants, MonotoneAndBounded) {
  const double gamma = 0.0625, b0 = 3.0, level = 0.5;
  const auto config = *presets::by_name(GetParam(), gamma, b0, level);
  const auto traj = engine_run(heavy_quadratic(1), config, {2.0}, 3000, 5);
  ASSERT_FALSE(traj.failed);
  double prev = 0.0;
  for (const auto& r : traj.records) {
    EXPECT_GE(r.accumulator, b0);
    EXPECT_GE(r.accumulator, prev);
    EXPECT_LE(gamma / r.accumulator, gamma / std::max(prev, b0));
    prev = r.accumulator;
    if (config.clip) {
      // The record at step t holds the accumulator after t increments, each
      // at most eta lambda^2.
      const double bound = b0 * b0 + config.eta * static_cast<double>(r.step) * level * level;
      EXPECT_LE(r.accumulator * r.accumulator, bound * (1.0 + 1e-12)) << "step " << r.step;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AdagradFamily, AccumulatorInvariants,
                         ::testing::Values("adagrad", "adagradd", "radagrad", "radagradd", "clip_adagrad",
                                           "clip_adagradd", "clip_radagrad", "clip_radagradd"));

TEST(Adam, SignDescentReduction) {
  auto config = presets::adam(0.1, 0.0, 0.0, 1.0);
  config.bias_correction = false;
  auto state = init_state(config, {1.0, -2.0, 3.0});
  const V g{0.3, -7.0, 1e-3};
  step(state, config, g);
  EXPECT_EQ(state.b, (V{0.3, 7.0, 1e-3}));
  EXPECT_NEAR(state.x[0], 0.9, 1e-15);
  EXPECT_NEAR(state.x[1], -1.9, 1e-15);
  EXPECT_NEAR(state.x[2], 2.9, 1e-15);
}

TEST(Adam, FirstStepBiasCorrectionRecoversGradient) {
  auto corrected = presets::adam(0.01, 0.9, 0.999, 1e-8);
  auto state = init_state(corrected, {1.0});
  const double g = 0.75;
  step(state, corrected, std::span<const double>(&g, 1));
  EXPECT_NEAR(state.m[0] / (1.0 - 0.9), g, 2e-16);
  // Corrected m over corrected b is g / |g| up to the tiny b_init term.
  EXPECT_NEAR(state.x[0], 1.0 - 0.01, 1e-12);
}

TEST(Adam, CoordinateClipFeedsMomentAndAccumulator) {
  auto config = presets::clip_adam(0.1, 0.5, 0.5, 1.0, ClipSpec{ClipMode::coordinate, 0.02, {}});
  config.bias_correction = false;
  auto state = init_state(config, {1.0, 1.0});
  const V g{0.5, 0.01};
  step(state, config, g);
  EXPECT_EQ(state.m[0], 0.5 * 0.02);
  EXPECT_EQ(state.m[1], 0.5 * 0.01);
  EXPECT_EQ(state.b[0], std::sqrt(0.5 * 1.0 * 1.0 + 1.0 * 0.5 * 0.02 * 0.02));
}

TEST(Adam, DelayUsesPreUpdateAccumulator) {
  auto config = presets::adam(0.1, 0.0, 0.9, 2.0);
  config.bias_correction = false;
  config.delay = true;
  auto state = init_state(config, {1.0});
  const double g = 4.0;
  step(state, config, std::span<const double>(&g, 1));
  EXPECT_EQ(state.x[0], 1.0 - (0.1 / 2.0) * 4.0);
  EXPECT_EQ(state.b[0], std::sqrt(0.9 * 2.0 * 2.0 + 1.0 * (1.0 - 0.9) * 4.0 * 4.0));
}

TEST(Adam, TwinsOfAdagrad) {
  // beta1 = 0, beta2 = 1 - 1/K: b_t^2 over b^2 + (1/K) sum_{k<=t} g_k^2 lies in
  // [1/e, 1] while t + 1 <= K - 1.
  const std::int64_t K = 1000;
  auto config = presets::adam(0.01, 0.0, 1.0 - 1.0 / static_cast<double>(K), 1.5);
  config.bias_correction = false;
  std::vector<double> grads;
  RunOptions o;
  o.observer = [&](std::int64_t, const GradientSample& s) { grads.push_back(s.stochastic[0]); };
  Rng rng(21);
  const auto traj = run(heavy_quadratic(1), config, {2.0}, K - 1, rng, o);
  ASSERT_FALSE(traj.failed);
  double sum = 0.0;
  for (std::int64_t t = 0; t + 1 <= K - 1; ++t) {
    sum += grads[t] * grads[t];
    const double b_t = traj.records[t + 1].accumulator;
    const double ratio = b_t * b_t / (1.5 * 1.5 + sum / static_cast<double>(K));
    EXPECT_LE(ratio, 1.0 + 1e-12) << t;
    EXPECT_GE(ratio, std::exp(-1.0) * (1.0 - 1e-12)) << t;
  }
}

TEST(OptimizerConfig, Validation) {
  EXPECT_THROW(presets::adagrad(0.0, 1.0).validate(1), InvalidArgument);
  EXPECT_THROW(presets::adagrad(0.1, 0.0).validate(1), InvalidArgument);
  EXPECT_THROW(presets::radagrad(0.1, 1.0, -1.0).validate(1), InvalidArgument);
  auto adam = presets::adam(0.1, 0.9, 0.999, 1.0);
  adam.delay = true;
  EXPECT_THROW(adam.validate(1), InvalidArgument);
  adam.bias_correction = false;
  EXPECT_NO_THROW(adam.validate(1));
  adam.beta2 = 1.5;
  EXPECT_THROW(adam.validate(1), InvalidArgument);
  auto sgd = presets::sgd(0.1);
  sgd.delay = true;
  EXPECT_THROW(sgd.validate(1), InvalidArgument);
  auto layered = presets::clip_adagrad(0.1, 1.0, 1.0);
  layered.clip->mode = ClipMode::layer;
  EXPECT_THROW(layered.validate(2), InvalidArgument);
  Rng rng(0);
  EXPECT_THROW(run(heavy_quadratic(1), presets::adagrad(0.1, 1.0), {1.0}, 0, rng), InvalidArgument);
}

TEST(Presets, NamesResolve) {
  for (const auto& name : presets::names()) {
    const auto c = presets::by_name(name, 0.25, 3.0, 0.5);
    ASSERT_TRUE(c.has_value()) << name;
    EXPECT_NO_THROW(c->validate(1)) << name;
    EXPECT_EQ(c->clip.has_value(), name.starts_with("clip_")) << name;
  }
  EXPECT_FALSE(presets::by_name("adamw", 1.0, 1.0, 1.0).has_value());
  EXPECT_EQ(presets::by_name("radagradd", 0.25, 3.0, 0.5)->eta, 0.0625);
  EXPECT_TRUE(presets::by_name("clip_radagradd", 0.25, 3.0, 0.5)->delay);
}

}  // namespace
}  // namespace clipada
