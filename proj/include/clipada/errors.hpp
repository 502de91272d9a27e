// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace clipada {

/// Bad input to a pure function (domain violation, non-finite value, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An adversarial construction or lower bound whose preconditions fail.
class ConstructionInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A closed-form predictor was asked for a step where its hypotheses break.
class ValidityError : public std::runtime_error {
 public:
  ValidityError(const std::string& what, std::int64_t step)
      : std::runtime_error(what), step_(step) {}

  /// First step index at which the precondition is violated (-1: scenario).
  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

/// Non-finite gradient, iterate or accumulator observed during a run.
class PoisonedState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigIssue {
  std::string path;
  std::string message;
};

/// Aggregates every problem found while validating a configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  ConfigError(std::string path, std::string message);

  const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

}  // namespace clipada
