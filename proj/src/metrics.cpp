// SPDX-License-Identifier: Apache-2.0

#include "clipada/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/special_functions/erf.hpp>

#include "clipada/errors.hpp"

namespace clipada::metrics {

namespace {

constexpr double kMild = 1.5;
constexpr double kExtreme = 3.0;

void require_samples(std::span<const double> samples) {
  if (samples.size() < 4) throw InvalidArgument("at least 4 samples are required");
  for (double v : samples) {
    if (std::isnan(v)) throw InvalidArgument("samples must not contain NaN");
  }
}

std::vector<double> sorted_copy(std::span<const double> samples) {
  std::vector<double> out(samples.begin(), samples.end());
  std::sort(out.begin(), out.end());
  return out;
}

Quartiles quartiles_sorted(std::span<const double> sorted) {
  return {quantile_sorted(sorted, 0.25), quantile_sorted(sorted, 0.5), quantile_sorted(sorted, 0.75)};
}

double exceedance(std::span<const double> sorted, const Quartiles& q, double a) {
  const double threshold = q.q3 + a * (q.q3 - q.q1);
  const auto first_above = std::upper_bound(sorted.begin(), sorted.end(), threshold);
  return static_cast<double>(sorted.end() - first_above) / static_cast<double>(sorted.size());
}

}  // namespace

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InvalidArgument("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("quantile probability must lie in [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  const double a = sorted[lo];
  if (frac == 0.0 || lo + 1 >= sorted.size()) return a;
  const double b = sorted[lo + 1];
  if (a == b) return a;
  if (std::isinf(a) || std::isinf(b)) return std::isinf(a) ? a : b;
  return a + frac * (b - a);
}

Quartiles quartiles(std::span<const double> samples) {
  require_samples(samples);
  const auto sorted = sorted_copy(samples);
  return quartiles_sorted(sorted);
}

double tail_prob(std::span<const double> samples, double a) {
  require_samples(samples);
  if (!(a > 0.0) || !std::isfinite(a)) throw InvalidArgument("tail multiplier a must be positive");
  const auto sorted = sorted_copy(samples);
  return exceedance(sorted, quartiles_sorted(sorted), a);
}

const NormalReference& normal_reference() {
  static const NormalReference ref = [] {
    const double q3 = std::numbers::sqrt2 * boost::math::erf_inv(0.5);
    const double iqr = 2.0 * q3;
    auto upper_tail = [](double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); };
    return NormalReference{upper_tail(q3 + kMild * iqr), upper_tail(q3 + kExtreme * iqr)};
  }();
  return ref;
}

TailReport tail_report(std::span<const double> samples) {
  require_samples(samples);
  const auto sorted = sorted_copy(samples);
  TailReport r;
  r.quartiles = quartiles_sorted(sorted);
  r.p_mild = exceedance(sorted, r.quartiles, kMild);
  r.p_extreme = exceedance(sorted, r.quartiles, kExtreme);
  const auto& ref = normal_reference();
  r.rho_mild = r.p_mild / ref.mild;
  r.rho_extreme = r.p_extreme / ref.extreme;
  return r;
}

RhoMetrics rho_metrics(std::span<const double> samples) {
  const auto r = tail_report(samples);
  return {r.rho_mild, r.rho_extreme};
}

Bands percentile_bands(const std::vector<std::vector<double>>& curves, std::span<const double> probs,
                       std::vector<std::int64_t> steps) {
  if (curves.empty()) throw InvalidArgument("percentile bands need at least one curve");
  const std::size_t len = curves.front().size();
  for (const auto& c : curves) {
    if (c.size() != len) throw InvalidArgument("ragged ensemble: curves differ in length");
  }
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("band probabilities must lie in [0, 1]");
  }
  if (steps.empty()) {
    steps.resize(len);
    for (std::size_t i = 0; i < len; ++i) steps[i] = static_cast<std::int64_t>(i);
  } else if (steps.size() != len) {
    throw InvalidArgument("step labels do not match curve length");
  }

  Bands out;
  out.steps = std::move(steps);
  out.probs.assign(probs.begin(), probs.end());
  out.values.assign(probs.size(), std::vector<double>(len));
  for (const auto& c : curves) {
    if (std::any_of(c.begin(), c.end(), [](double v) { return v == std::numeric_limits<double>::infinity(); })) {
      ++out.padded_runs;
    }
  }
  std::vector<double> column(curves.size());
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t s = 0; s < curves.size(); ++s) {
      if (std::isnan(curves[s][t])) throw InvalidArgument("curves must not contain NaN");
      column[s] = curves[s][t];
    }
    std::sort(column.begin(), column.end());
    for (std::size_t k = 0; k < probs.size(); ++k) out.values[k][t] = quantile_sorted(column, probs[k]);
  }
  return out;
}

double binomial_half_width(double p, std::size_t n, double z) {
  if (n == 0) throw InvalidArgument("binomial interval needs n >= 1");
  return z * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

FailureEstimate empirical_failure_prob(std::span<const double> final_values, double eps) {
  FailureEstimate out;
  out.total = final_values.size();
  if (out.total == 0) throw InvalidArgument("failure probability needs at least one run");
  // NaN counts as a failure: it cannot certify the success event.
  out.failures = static_cast<std::size_t>(std::count_if(
      final_values.begin(), final_values.end(), [eps](double v) { return !(v < eps); }));
  out.probability = static_cast<double>(out.failures) / static_cast<double>(out.total);
  const double hw = binomial_half_width(out.probability, out.total, 1.96);
  out.ci_lower = std::max(0.0, out.probability - hw);
  out.ci_upper = std::min(1.0, out.probability + hw);
  return out;
}

}  // namespace clipada::metrics
