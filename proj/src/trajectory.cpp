// SPDX-License-Identifier: Apache-2.0

#include "clipada/trajectory.hpp"

#include <algorithm>

#include "clipada/errors.hpp"

namespace clipada {

std::string to_string(Metric metric) {
  switch (metric) {
    case Metric::suboptimality:
      return "suboptimality";
    case Metric::squared_distance:
      return "squared_distance";
    case Metric::grad_norm_sq:
      return "grad_norm_sq";
  }
  return "unknown";
}

Metric parse_metric(const std::string& name) {
  if (name == "suboptimality") return Metric::suboptimality;
  if (name == "squared_distance") return Metric::squared_distance;
  if (name == "grad_norm_sq") return Metric::grad_norm_sq;
  throw InvalidArgument("unknown metric '" + name + "'");
}

double StepRecord::metric(Metric m) const {
  switch (m) {
    case Metric::suboptimality:
      return suboptimality;
    case Metric::squared_distance:
      return squared_distance;
    case Metric::grad_norm_sq:
      return grad_norm_sq;
  }
  return 0.0;
}

std::ptrdiff_t Trajectory::find(std::int64_t step) const {
  auto it = std::lower_bound(records.begin(), records.end(), step,
                             [](const StepRecord& r, std::int64_t s) { return r.step < s; });
  if (it == records.end() || it->step != step) return -1;
  return it - records.begin();
}

}  // namespace clipada
