// SPDX-License-Identifier: Apache-2.0

// Grid of deterministic Huber scenarios shared by the theory tests and the
// acceptance binary.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "clipada/harness.hpp"
#include "clipada/optimizers.hpp"
#include "clipada/problems.hpp"
#include "clipada/theory.hpp"

namespace clipada::testing {

struct HuberCase {
  theory::HuberScenario scenario;
  bool delayed = false;
};

inline bool grid_valid(const theory::HuberScenario& s, bool delayed) {
  return s.x0 > s.gamma && s.nu < s.x0 - s.gamma && (!delayed || s.b >= s.nu);
}

// Every valid combination for one variant.
inline std::vector<HuberCase> huber_grid(bool delayed) {
  const double x0s[] = {0.5, 1.0, 2.0, 3.0, 5.0, 8.0};
  const double gammas[] = {0.01, 0.03, 0.1, 0.2, 0.3, 0.6};
  const double nus[] = {0.001, 0.005, 0.01, 0.05, 0.1};
  const double bs[] = {0.05, 0.1, 0.5, 1.0, 2.0, 3.0};
  std::vector<HuberCase> out;
  for (double x0 : x0s)
    for (double gamma : gammas)
      for (double nu : nus)
        for (double b : bs) {
          theory::HuberScenario s{x0, gamma, nu, b};
          if (grid_valid(s, delayed)) out.push_back({s, delayed});
        }
  return out;
}

inline double grid_threshold(const HuberCase& c) {
  return c.delayed ? theory::adagradd_iteration_threshold(c.scenario)
                   : theory::adagrad_iteration_threshold(c.scenario);
}

// Largest integer strictly below the threshold.
inline std::int64_t below_threshold(double threshold) {
  return static_cast<std::int64_t>(std::ceil(threshold)) - 1;
}

// Zero-noise AdaGrad(D) iterates x_0 .. x_steps on the Huber loss.
inline std::vector<double> simulate_huber(const HuberCase& c, std::int64_t steps) {
  const auto& s = c.scenario;
  const auto config = c.delayed ? presets::adagradd(s.gamma, s.b) : presets::adagrad(s.gamma, s.b);
  auto state = init_state(config, {s.x0});
  std::vector<double> xs{s.x0};
  xs.reserve(static_cast<std::size_t>(steps) + 1);
  double g = 0.0;
  for (std::int64_t t = 0; t < steps; ++t) {
    g = huber_grad(state.x[0], s.nu);
    step(state, config, std::span<const double>(&g, 1));
    xs.push_back(state.x[0]);
  }
  return xs;
}

// Final iterate only, for long runs up to the threshold.
inline double simulate_huber_final(const HuberCase& c, std::int64_t steps) {
  const auto& s = c.scenario;
  const auto config = c.delayed ? presets::adagradd(s.gamma, s.b) : presets::adagrad(s.gamma, s.b);
  auto state = init_state(config, {s.x0});
  double g = 0.0;
  for (std::int64_t t = 0; t < steps; ++t) {
    g = huber_grad(state.x[0], s.nu);
    step(state, config, std::span<const double>(&g, 1));
  }
  return state.x[0];
}

}  // namespace clipada::testing
