// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace clipada::metrics {

struct Quartiles {
  double q1 = 0.0;
  double q2 = 0.0;
  double q3 = 0.0;
};

// Type-7 quantile (h = (n-1)p, linear interpolation) of an ascending sample.
// Infinite neighbours propagate without producing NaN.
double quantile_sorted(std::span<const double> sorted, double p);

Quartiles quartiles(std::span<const double> samples);

// Fraction of samples strictly above Q3 + a (Q3 - Q1).
double tail_prob(std::span<const double> samples, double a);

struct NormalReference {
  double mild = 0.0;     // a = 1.5
  double extreme = 0.0;  // a = 3
};

// One-sided standard-normal exceedance beyond Q3 + a IQR, evaluated with erfc.
const NormalReference& normal_reference();

struct TailReport {
  Quartiles quartiles;
  double p_mild = 0.0;
  double p_extreme = 0.0;
  double rho_mild = 0.0;
  double rho_extreme = 0.0;
};

struct RhoMetrics {
  double mild = 0.0;
  double extreme = 0.0;
};

RhoMetrics rho_metrics(std::span<const double> samples);
TailReport tail_report(std::span<const double> samples);

struct Bands {
  std::vector<std::int64_t> steps;
  std::vector<double> probs;
  std::vector<std::vector<double>> values;  // values[prob][step]
  std::size_t padded_runs = 0;
};

// Pointwise p-quantiles across equal-length curves. Divergent runs are
// expected to be padded with +inf by the caller; `padded_runs` counts curves
// containing +inf.
Bands percentile_bands(const std::vector<std::vector<double>>& curves, std::span<const double> probs,
                       std::vector<std::int64_t> steps = {});

struct FailureEstimate {
  std::size_t failures = 0;
  std::size_t total = 0;
  double probability = 0.0;
  double ci_lower = 0.0;  // 95% normal-approximation interval, clamped to [0, 1]
  double ci_upper = 0.0;
};

FailureEstimate empirical_failure_prob(std::span<const double> final_values, double eps);

// Normal-approximation half width z sqrt(p(1-p)/n).
double binomial_half_width(double p, std::size_t n, double z);

}  // namespace clipada::metrics
