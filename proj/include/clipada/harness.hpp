// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "clipada/config.hpp"
#include "clipada/metrics.hpp"
#include "clipada/optimizers.hpp"
#include "clipada/problems.hpp"
#include "clipada/theory.hpp"
#include "clipada/trajectory.hpp"

namespace clipada {

struct ProblemSpec {
  std::string kind = "quadratic";  // quadratic | huber
  std::size_t dim = 1;
  double huber_nu = 0.01;
};

struct NoiseSpec {
  std::string kind = "none";  // none | pareto_symmetric | adv_adagrad | adv_adagradd
  double sigma = 1.0;
};

struct OutputNames {
  std::string ensemble = "ensemble.csv";
  std::string bands = "bands.csv";
  std::string summary = "summary.json";
  std::string svg = "bands.svg";
};

// Inputs of the high-probability convex check; zero means "derive".
struct TheorySpec {
  double delta = 0.1;
  double alpha = 1.25;
  double radius = 0.0;  // 0: |x0 - x*|
  double sigma = 0.0;   // 0: certify from the noise model
  double bound_multiplier = 1.0;
};

struct ExperimentConfig {
  std::string label = "run";
  ProblemSpec problem;
  NoiseSpec noise;
  OptimizerConfig optimizer;
  std::vector<double> x0{2.0};
  std::int64_t steps = 1000;
  std::size_t n_seeds = 100;
  std::uint64_t base_seed = 0;  // replicate i uses base_seed + i
  Metric metric = Metric::squared_distance;
  std::vector<double> percentiles{0.1, 0.5, 0.9};
  std::int64_t record_every = 1;
  double failure_epsilon = 1e-3;
  TheorySpec theory;
  OutputNames outputs;
  std::uint64_t config_hash = 0;

  std::uint64_t seed(std::size_t replicate) const { return base_seed + replicate; }
};

// Schema of accepted keys, for documentation and unknown-key detection.
const std::vector<std::string>& config_keys();

// Builds one experiment; `methods`/`method.*` keys are rejected here.
ExperimentConfig parse_experiment(const KeyValues& kv);
// Expands `methods = a, b` with per-method `method.<name>.<key>` overrides.
// Without `methods` the result holds a single experiment.
std::vector<ExperimentConfig> parse_comparison(const KeyValues& kv);

StochasticProblem build_problem(const ExperimentConfig& config);

struct TrajectoryEnsemble {
  std::uint64_t config_hash = 0;
  std::string label;
  std::vector<std::uint64_t> seeds;
  std::vector<Trajectory> runs;

  std::size_t failures() const;
};

// Runs the replicates on up to `jobs` threads; results are ordered by seed
// and do not depend on `jobs`.
TrajectoryEnsemble run_experiment(const ExperimentConfig& config, std::size_t jobs = 1);

// Per-seed metric curves over the ensemble's recorded steps; failed runs are
// padded with +inf. Throws InvalidArgument on a ragged ensemble.
std::vector<std::vector<double>> metric_curves(const TrajectoryEnsemble& ensemble, Metric metric,
                                               std::vector<std::int64_t>* steps = nullptr);
metrics::Bands ensemble_bands(const TrajectoryEnsemble& ensemble, Metric metric,
                              const std::vector<double>& probs);
metrics::FailureEstimate ensemble_failure(const TrajectoryEnsemble& ensemble, Metric metric, double eps);

struct MethodReport {
  std::string label;
  TrajectoryEnsemble ensemble;
  metrics::Bands bands;
  metrics::FailureEstimate failure;
};

struct ComparisonReport {
  std::vector<MethodReport> methods;
};

// Every config must share problem, noise, steps and seeds, so compared
// methods consume common random numbers.
ComparisonReport compare(const std::vector<ExperimentConfig>& configs, std::size_t jobs = 1);

enum class ConstructionKind { adagrad, adagradd };

struct FailureParams {
  ConstructionKind kind = ConstructionKind::adagrad;
  double x0 = 2.0;
  double gamma = 0.1;
  double nu = 0.01;
  double sigma = 1.0;
  double b_init = 1.0;  // b_{-1} (adagrad) or b_0 (adagradd)
  std::int64_t steps = 10000;
  std::size_t replays = 10000;
  std::uint64_t base_seed = 0;
};

struct ConstructionBranch {
  double xi = 0.0;
  double final_x = 0.0;
  double final_suboptimality = 0.0;
  double threshold = 0.0;  // iteration threshold from the branch's state
  bool fails = false;      // f(x_K) - f* >= eps
};

struct FailureConstructionReport {
  FailureParams params;
  double epsilon = 0.0;  // nu^2 / 2
  double amplitude = 0.0;
  double activation_prob = 0.0;  // 1 / A^2
  bool oracle_active = true;
  double lower_bound_K = 0.0;
  bool lower_bound_feasible = true;
  double reference_threshold = 0.0;  // deterministic-run threshold
  ConstructionBranch unkicked;
  std::vector<ConstructionBranch> kicked;
  bool consequence_holds = false;
  bool consistent = false;
  std::size_t activations = 0;
  std::size_t failures = 0;
  double activation_freq = 0.0;
  double failure_freq = 0.0;
  // Branch probabilities times the deterministic branch outcomes.
  double expected_failure_prob = 0.0;
  double ci99_half_width = 0.0;
  bool activation_matches = false;
  bool failure_matches = false;
  bool passed = false;
};

FailureConstructionReport verify_failure_construction(const FailureParams& params, std::size_t jobs = 1);
FailureParams failure_params_from(const ExperimentConfig& config, ConstructionKind kind);

struct ConvexCheckParams {
  std::int64_t steps = 200;  // K; the run takes K + 1 iterations
  double delta = 0.1;
  std::size_t n_seeds = 500;
  std::uint64_t base_seed = 0;
  double x0 = 2.0;
  double b0 = 1.0;
  double alpha = 1.25;
  double noise_scale = 1.0;  // 0 disables noise
  double radius = 0.0;       // 0: |x0|
  double sigma = 0.0;        // 0: certified from the density
  double bound_multiplier = 1.0;
};

struct ConvexTheoremReport {
  ConvexCheckParams params;
  theory::TheoryParams theory;
  double radius = 0.0;
  double sigma = 0.0;
  double bound = 0.0;  // multiplier * 2 R^2
  std::vector<double> weighted_sums;
  std::size_t passes = 0;
  double pass_fraction = 0.0;
  double required_fraction = 0.0;  // 1 - delta - 1.96 sqrt(delta (1-delta) / n)
  bool passed = false;
};

ConvexTheoremReport verify_convex_theorem(const ConvexCheckParams& params, std::size_t jobs = 1);
ConvexCheckParams convex_params_from(const ExperimentConfig& config);

}  // namespace clipada
