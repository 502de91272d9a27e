// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>
#include <string>

#include "clipada/errors.hpp"
#include "clipada/io.hpp"

namespace clipada::io {
namespace {

namespace fs = std::filesystem;
constexpr double kInf = std::numeric_limits<double>::infinity();

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("clipada_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(FormatDouble, RoundTripsBitExactly) {
  std::mt19937_64 engine(1);
  for (int i = 0; i < 100000; ++i) {
    std::uint64_t bits = engine();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    if (std::isnan(v)) continue;
    EXPECT_EQ(parse_double(format_double(v)), v) << format_double(v);
  }
  for (double v : {0.0, -0.0, 1.0, 0.1, 5e-324, 1.7976931348623157e308}) {
    const double back = parse_double(format_double(v));
    EXPECT_EQ(back, v);
    EXPECT_EQ(std::signbit(back), std::signbit(v));
  }
}

TEST(FormatDouble, ShortestAndNonFinite) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(kInf), "inf");
  EXPECT_EQ(format_double(-kInf), "-inf");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(parse_double("inf"), kInf);
  EXPECT_EQ(parse_double("-inf"), -kInf);
  EXPECT_TRUE(std::isnan(parse_double("nan")));
}

TEST(ParseDouble, RejectsMalformed) {
  for (const char* bad : {"", "1.0x", " 1", "one", "1,5"}) EXPECT_THROW(parse_double(bad), InvalidArgument) << bad;
}

TrajectoryEnsemble sample_ensemble() {
  TrajectoryEnsemble e;
  e.seeds = {7, 3, 11};
  for (std::size_t i = 0; i < 3; ++i) {
    Trajectory t;
    t.dim = 1;
    for (std::int64_t s = 0; s <= 20; s += 10) {
      const double v = 0.1 * static_cast<double>(i + 1) / static_cast<double>(s + 3);
      t.records.push_back({s, v, 2 * v, std::sqrt(v), 1.0 + v});
    }
    e.runs.push_back(t);
  }
  e.runs[1].records[2].suboptimality = kInf;
  return e;
}

TEST(EnsembleCsv, RoundTrip) {
  const auto e = sample_ensemble();
  const auto text = ensemble_csv(e);
  EXPECT_EQ(text.substr(0, text.find('\n')), "seed,step,suboptimality,squared_distance,grad_norm_sq,accumulator");
  const auto back = parse_ensemble_csv(text);
  EXPECT_EQ(back.seeds, e.seeds);
  ASSERT_EQ(back.runs.size(), e.runs.size());
  for (std::size_t i = 0; i < e.runs.size(); ++i) {
    ASSERT_EQ(back.runs[i].records.size(), e.runs[i].records.size());
    for (std::size_t j = 0; j < e.runs[i].records.size(); ++j) {
      const auto& a = e.runs[i].records[j];
      const auto& b = back.runs[i].records[j];
      EXPECT_EQ(a.step, b.step);
      EXPECT_EQ(a.suboptimality, b.suboptimality);
      EXPECT_EQ(a.squared_distance, b.squared_distance);
      EXPECT_EQ(a.grad_norm_sq, b.grad_norm_sq);
      EXPECT_EQ(a.accumulator, b.accumulator);
    }
  }
  EXPECT_EQ(ensemble_csv(back), text);
}

TEST(EnsembleCsv, RejectsBadInput) {
  EXPECT_THROW(parse_ensemble_csv("wrong,header\n"), InvalidArgument);
  EXPECT_THROW(parse_ensemble_csv("seed,step,suboptimality,squared_distance,grad_norm_sq,accumulator\n1,2,3\n"),
               InvalidArgument);
}

TEST(BandsCsv, RoundTrip) {
  metrics::Bands b;
  b.steps = {0, 10, 20};
  b.probs = {0.1, 0.5, 0.9};
  b.values = {{1.0, 0.5, 0.25}, {2.0, 1.0, kInf}, {3.0, 1.0 / 3.0, kInf}};
  const auto text = bands_csv(b);
  const auto back = parse_bands_csv(text);
  EXPECT_EQ(back.steps, b.steps);
  EXPECT_EQ(back.probs, b.probs);
  EXPECT_EQ(back.values, b.values);
  EXPECT_EQ(bands_csv(back), text);
  EXPECT_THROW(parse_bands_csv("step,prob,value\n0,0.5,1\n10,0.9,1\n"), InvalidArgument);
}

TEST(Histogram, CountsAndOverflow) {
  const auto h = histogram({0.0, 0.5, 0.99, 1.0, 2.5, 9.999, 10.0, 42.0}, 10, 10.0);
  ASSERT_EQ(h.edges.size(), 11u);
  EXPECT_EQ(h.counts[0], 3u);
  EXPECT_EQ(h.counts[1], 1u);
  EXPECT_EQ(h.counts[2], 1u);
  EXPECT_EQ(h.counts[9], 1u);
  EXPECT_EQ(h.overflow, 2u);
  std::uint64_t total = h.overflow;
  for (auto c : h.counts) total += c;
  EXPECT_EQ(total, 8u);
  const auto csv = histogram_csv(h);
  EXPECT_NE(csv.find("10,inf,2\n"), std::string::npos);
  EXPECT_THROW(histogram({-1.0}, 10, 10.0), InvalidArgument);
  EXPECT_THROW(histogram({1.0}, 0, 10.0), InvalidArgument);
}

TEST(Svg, DrawsEveryMethod) {
  metrics::Bands b;
  b.steps = {0, 5, 10};
  b.probs = {0.1, 0.5, 0.9};
  b.values = {{1.0, 0.1, 0.01}, {2.0, 0.2, kInf}, {4.0, 0.4, kInf}};
  const auto svg = bands_svg({{"a<b", b}, {"second", b}}, "title & co", "f");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  EXPECT_NE(svg.find("a&lt;b"), std::string::npos);
  EXPECT_NE(svg.find("title &amp; co"), std::string::npos);
  EXPECT_NE(svg.find("second"), std::string::npos);
  EXPECT_EQ(svg.find("nan"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Json, NonFiniteValuesBecomeStrings) {
  metrics::FailureEstimate f;
  f.failures = 1;
  f.total = 2;
  f.probability = kInf;
  f.ci_upper = std::nan("");
  const auto j = to_json(f);
  EXPECT_EQ(j.at("probability"), "inf");
  EXPECT_EQ(j.at("ci95").at(1), "nan");
  EXPECT_EQ(j.at("failures"), 1);
  EXPECT_NO_THROW((void)j.dump());
}

TEST(Json, SummaryCarriesConfigHash) {
  ExperimentConfig c;
  c.config_hash = 0xaf63dc4c8601ec8cULL;
  auto e = sample_ensemble();
  e.config_hash = c.config_hash;
  const auto b = ensemble_bands(e, Metric::suboptimality, {0.5});
  const auto j = summary_json(c, e, b, ensemble_failure(e, Metric::suboptimality, 1e-3));
  EXPECT_NE(j.dump().find("af63dc4c8601ec8c"), std::string::npos);
}

TEST(AtomicWrite, ReplacesAndLeavesNoTemporary) {
  const auto dir = scratch_dir("atomic");
  const auto path = dir / "nested" / "out.txt";
  write_file_atomic(path, "first");
  EXPECT_EQ(read_file(path), "first");
  write_file_atomic(path, std::string("second\0with nul", 15));
  EXPECT_EQ(read_file(path), std::string("second\0with nul", 15));
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& entry : fs::directory_iterator(path.parent_path())) ++entries;
  EXPECT_EQ(entries, 1u);
  EXPECT_THROW(read_file(dir / "missing"), std::runtime_error);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace clipada::io
