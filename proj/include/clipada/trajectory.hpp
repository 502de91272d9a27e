// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace clipada {

enum class Metric { suboptimality, squared_distance, grad_norm_sq };

std::string to_string(Metric metric);
Metric parse_metric(const std::string& name);

/// Metrics of the iterate x_t, before step t is taken.
///
/// `accumulator` is the scaling state held at that moment: b_t for the
/// delayed AdaGrad variants, b_{t-1} for the undelayed ones (the divisor of
/// step t is then computed inside the step), the smallest component of b for
/// the Adam family and 1 for SGD.
struct StepRecord {
  std::int64_t step = 0;
  double suboptimality = 0.0;
  double squared_distance = 0.0;
  double grad_norm_sq = 0.0;
  double accumulator = 0.0;

  double metric(Metric m) const;
};

/// A run's recorded steps plus (optionally) the iterates at those steps.
struct Trajectory {
  std::size_t dim = 0;
  std::vector<StepRecord> records;
  std::vector<double> iterates;  // records.size() * dim when kept
  bool failed = false;
  std::int64_t failed_at = -1;
  std::string failure_reason;

  bool has_iterates() const { return !records.empty() && iterates.size() == records.size() * dim; }

  std::span<const double> iterate(std::size_t index) const {
    return {iterates.data() + index * dim, dim};
  }

  // Index of the record for `step`, or -1 when that step was not recorded.
  std::ptrdiff_t find(std::int64_t step) const;

  const StepRecord& final_record() const { return records.back(); }
};

}  // namespace clipada
