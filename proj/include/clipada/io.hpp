// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "clipada/harness.hpp"
#include "clipada/metrics.hpp"

namespace clipada::io {

// Shortest text that parses back to the same double ("inf", "-inf", "nan"
// for non-finite values).
std::string format_double(double value);
double parse_double(std::string_view text);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

// seed,step,suboptimality,squared_distance,grad_norm_sq,accumulator
std::string ensemble_csv(const TrajectoryEnsemble& ensemble);
// Rebuilds seeds and step records (iterates and failure flags are not part
// of the CSV).
TrajectoryEnsemble parse_ensemble_csv(std::string_view text);

// step,prob,value
std::string bands_csv(const metrics::Bands& bands);
metrics::Bands parse_bands_csv(std::string_view text);

struct Histogram {
  std::vector<double> edges;  // bins + 1 edges
  std::vector<std::uint64_t> counts;
  std::uint64_t overflow = 0;  // samples beyond the last edge
};

Histogram histogram(const std::vector<double>& samples, std::size_t bins, double upper);
// bin_lo,bin_hi,count
std::string histogram_csv(const Histogram& hist);

// Median line plus the outermost band per method, log-scaled y axis.
std::string bands_svg(const std::vector<std::pair<std::string, metrics::Bands>>& series,
                      const std::string& title, const std::string& y_label);

nlohmann::json to_json(const metrics::TailReport& report);
nlohmann::json to_json(const metrics::FailureEstimate& estimate);
nlohmann::json to_json(const theory::TheoryParams& params);
nlohmann::json to_json(const FailureConstructionReport& report);
nlohmann::json to_json(const ConvexTheoremReport& report);
nlohmann::json summary_json(const ExperimentConfig& config, const TrajectoryEnsemble& ensemble,
                            const metrics::Bands& bands, const metrics::FailureEstimate& failure);

}  // namespace clipada::io
