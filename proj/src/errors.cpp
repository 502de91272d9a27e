// SPDX-License-Identifier: Apache-2.0

#include "clipada/errors.hpp"

#include <utility>

namespace clipada {

namespace {

std::string describe(const std::vector<ConfigIssue>& issues) {
  std::string text = "invalid configuration";
  for (const auto& issue : issues) {
    text += "\n  " + issue.path + ": " + issue.message;
  }
  return text;
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::runtime_error(describe(issues)), issues_(std::move(issues)) {}

ConfigError::ConfigError(std::string path, std::string message)
    : ConfigError(std::vector<ConfigIssue>{{std::move(path), std::move(message)}}) {}

}  // namespace clipada
