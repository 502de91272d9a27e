// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "clipada/errors.hpp"
#include "clipada/metrics.hpp"
#include "clipada/problems.hpp"

namespace clipada::metrics {
namespace {

using V = std::vector<double>;
constexpr double kInf = std::numeric_limits<double>::infinity();

V normal_draws(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal;
  V xs(n);
  for (double& x : xs) x = normal(engine);
  return xs;
}

TEST(Quartiles, Examples) {
  const auto a = quartiles(V{1, 2, 3, 4, 5});
  EXPECT_EQ(a.q1, 2.0);
  EXPECT_EQ(a.q2, 3.0);
  EXPECT_EQ(a.q3, 4.0);
  const auto b = quartiles(V{0, 1, 2, 3});
  EXPECT_EQ(b.q1, 0.75);
  EXPECT_EQ(b.q2, 1.5);
  EXPECT_EQ(b.q3, 2.25);
  const auto c = quartiles(V(9, 4.5));
  EXPECT_EQ(c.q1, 4.5);
  EXPECT_EQ(c.q3, 4.5);
}

TEST(Quartiles, Errors) {
  EXPECT_THROW(quartiles(V{1, 2, 3}), InvalidArgument);
  EXPECT_THROW(quartiles(V{1, 2, std::nan(""), 4}), InvalidArgument);
  EXPECT_THROW(tail_prob(V{1, 2, 3}, 1.5), InvalidArgument);
  EXPECT_THROW(tail_prob(V{1, 2, 3, 4}, 0.0), InvalidArgument);
  EXPECT_THROW(rho_metrics(V{1, 2}), InvalidArgument);
}

TEST(Quantile, InfiniteNeighbours) {
  const V s{0.0, 1.0, kInf, kInf};
  EXPECT_EQ(quantile_sorted(s, 0.0), 0.0);
  EXPECT_EQ(quantile_sorted(s, 1.0), kInf);
  EXPECT_EQ(quantile_sorted(s, 0.5), kInf);
  EXPECT_EQ(quantile_sorted(s, 1.0 / 3.0), 1.0);
  EXPECT_FALSE(std::isnan(quantile_sorted(V{kInf, kInf, kInf, kInf}, 0.3)));
}

TEST(Quartiles, PermutationInvariantAndShiftMonotone) {
  std::mt19937_64 engine(4);
  auto xs = normal_draws(1001, 3);
  const auto base = quartiles(xs);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(xs.begin(), xs.end(), engine);
    const auto q = quartiles(xs);
    EXPECT_EQ(q.q1, base.q1);
    EXPECT_EQ(q.q2, base.q2);
    EXPECT_EQ(q.q3, base.q3);
  }
  for (double c : {0.5, 3.0, -2.0}) {
    V shifted(xs);
    for (double& v : shifted) v += c;
    const auto q = quartiles(shifted);
    if (c > 0) {
      EXPECT_GT(q.q1, base.q1);
      EXPECT_GT(q.q3, base.q3);
    } else {
      EXPECT_LT(q.q1, base.q1);
      EXPECT_LT(q.q3, base.q3);
    }
    EXPECT_NEAR(q.q2, base.q2 + c, 1e-12);
  }
}

TEST(TailProb, Examples) {
  // Q1 = 1, Q3 = 3, threshold 6: only 100 exceeds it.
  EXPECT_DOUBLE_EQ(tail_prob(V{0, 1, 2, 3, 100}, 1.5), 0.2);
  EXPECT_EQ(tail_prob(V(10, 7.0), 1.5), 0.0);
  // Strictly above: a sample exactly at the threshold does not count.
  EXPECT_EQ(tail_prob(V{0, 1, 2, 3, 6}, 1.5), 0.0);
}

TEST(TailProb, MonotoneInAAndScaleInvariant) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    V xs(500);
    for (double& v : xs) v = std::abs(heavy_tail_sample(rng));
    const double mild = tail_prob(xs, 1.5);
    EXPECT_LE(tail_prob(xs, 3.0), mild);
    for (double c : {2.0, 0.125, 3.7, 1e-3}) {
      V scaled(xs);
      for (double& v : scaled) v *= c;
      EXPECT_EQ(tail_prob(scaled, 1.5), mild) << c;
    }
  }
}

TEST(NormalReference, MatchesErfcAnchors) {
  const auto& ref = normal_reference();
  EXPECT_NEAR(ref.mild, 3.4883016196401184e-3, 1e-15);
  EXPECT_NEAR(ref.extreme, 1.1709712314515798e-6, 1e-18);
}

TEST(Rho, ConstantSampleIsZero) {
  const auto r = rho_metrics(V(100, 1.0));
  EXPECT_EQ(r.mild, 0.0);
  EXPECT_EQ(r.extreme, 0.0);
}

TEST(Rho, StandardNormalNearOne) {
  const auto xs = normal_draws(1'000'000, 123);
  const auto r = rho_metrics(xs);
  EXPECT_GE(r.mild, 0.8);
  EXPECT_LE(r.mild, 1.2);
  EXPECT_TRUE(std::isfinite(r.extreme));
}

TEST(Rho, HeavyTailDensityIsFarFromNormal) {
  Rng rng(5);
  V xs(1'000'000);
  for (double& v : xs) v = heavy_tail_sample(rng);
  EXPECT_GT(rho_metrics(xs).mild, 5.0);
  for (double& v : xs) v = std::abs(v);
  EXPECT_GT(rho_metrics(xs).mild, 5.0);
}

TEST(TailReport, Invariants) {
  Rng rng(6);
  V xs(10000);
  for (double& v : xs) v = heavy_tail_sample(rng);
  const auto t = tail_report(xs);
  EXPECT_LE(t.quartiles.q1, t.quartiles.q2);
  EXPECT_LE(t.quartiles.q2, t.quartiles.q3);
  EXPECT_LE(0.0, t.p_extreme);
  EXPECT_LE(t.p_extreme, t.p_mild);
  EXPECT_LE(t.p_mild, 1.0);
  EXPECT_DOUBLE_EQ(t.rho_mild, t.p_mild / normal_reference().mild);
}

TEST(Bands, IdenticalCurves) {
  const V curve{5, 4, 3, 2, 1};
  const std::vector<V> curves(10, curve);
  const V probs{0.1, 0.5, 0.9};
  const auto b = percentile_bands(curves, probs);
  ASSERT_EQ(b.values.size(), 3u);
  for (const auto& row : b.values) EXPECT_EQ(row, curve);
  EXPECT_EQ(b.steps, (std::vector<std::int64_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(b.padded_runs, 0u);
}

TEST(Bands, MedianMatchesDirectComputation) {
  Rng rng(9);
  std::vector<V> curves(100, V(20));
  for (auto& c : curves)
    for (double& v : c) v = heavy_tail_sample(rng);
  const V probs{0.5};
  const auto b = percentile_bands(curves, probs);
  for (std::size_t t = 0; t < 20; ++t) {
    V column;
    for (const auto& c : curves) column.push_back(c[t]);
    std::sort(column.begin(), column.end());
    EXPECT_EQ(b.values[0][t], 0.5 * (column[49] + column[50]));
  }
}

TEST(Bands, ZeroAndOneGiveEnvelope) {
  Rng rng(10);
  std::vector<V> curves(37, V(15));
  for (auto& c : curves)
    for (double& v : c) v = heavy_tail_sample(rng);
  const V probs{0.0, 1.0};
  const auto b = percentile_bands(curves, probs);
  for (std::size_t t = 0; t < 15; ++t) {
    double lo = kInf, hi = -kInf;
    for (const auto& c : curves) {
      lo = std::min(lo, c[t]);
      hi = std::max(hi, c[t]);
    }
    EXPECT_EQ(b.values[0][t], lo);
    EXPECT_EQ(b.values[1][t], hi);
  }
}

TEST(Bands, PaddingConvention) {
  const V probs{0.9};
  for (std::size_t divergent : {3u, 10u, 11u}) {
    std::vector<V> curves(100, V{1.0, 2.0});
    for (std::size_t i = 0; i < divergent; ++i) curves[i * 7] = V{1.0, kInf};
    const auto b = percentile_bands(curves, probs);
    EXPECT_EQ(b.padded_runs, divergent);
    EXPECT_EQ(b.values[0][0], 1.0);
    // h = 99 * 0.9 = 89.1 needs order statistics 89 and 90 finite.
    EXPECT_EQ(std::isfinite(b.values[0][1]), divergent <= 9) << divergent;
  }
}

TEST(Bands, Errors) {
  const V probs{0.5};
  EXPECT_THROW(percentile_bands({V{1, 2}, V{1}}, probs), InvalidArgument);
  EXPECT_THROW(percentile_bands({}, probs), InvalidArgument);
  EXPECT_THROW(percentile_bands({V{1, 2}}, V{1.5}), InvalidArgument);
  EXPECT_THROW(percentile_bands({V{1, std::nan("")}}, probs), InvalidArgument);
}

TEST(FailureProb, Counting) {
  V finals(100, 0.0);
  finals[3] = finals[50] = 2.0;
  finals[99] = 1.0;  // exactly eps counts
  const auto f = empirical_failure_prob(finals, 1.0);
  EXPECT_EQ(f.failures, 3u);
  EXPECT_EQ(f.total, 100u);
  EXPECT_DOUBLE_EQ(f.probability, 0.03);
  const double hw = 1.96 * std::sqrt(0.03 * 0.97 / 100.0);
  EXPECT_NEAR(f.ci_lower, 0.0, 1e-15);  // 0.03 - 0.0334 clamps to 0
  EXPECT_NEAR(f.ci_upper, 0.03 + hw, 1e-15);
}

TEST(FailureProb, AllBelowAndDivergent) {
  const auto zero = empirical_failure_prob(V(50, 0.1), 1.0);
  EXPECT_EQ(zero.probability, 0.0);
  EXPECT_EQ(zero.ci_lower, 0.0);
  EXPECT_GE(zero.ci_upper, 0.0);
  const auto inf = empirical_failure_prob(V{kInf, std::nan(""), 0.0, 0.0}, 1.0);
  EXPECT_EQ(inf.failures, 2u);
  EXPECT_THROW(empirical_failure_prob(V{}, 1.0), InvalidArgument);
}

TEST(BinomialHalfWidth, Values) {
  EXPECT_DOUBLE_EQ(binomial_half_width(0.5, 100, 1.96), 1.96 * 0.05);
  EXPECT_EQ(binomial_half_width(0.0, 100, 2.576), 0.0);
}

}  // namespace
}  // namespace clipada::metrics
