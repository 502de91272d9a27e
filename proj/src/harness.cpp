// SPDX-License-Identifier: Apache-2.0

#include "clipada/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "clipada/errors.hpp"

namespace clipada {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Value parsing. Every failure is collected as a ConfigIssue so a bad file is
// reported in one go.

class Reader {
 public:
  Reader(const KeyValues& kv, std::string prefix = {}) : kv_(kv), prefix_(std::move(prefix)) {}

  std::vector<ConfigIssue>& issues() { return issues_; }

  bool has(const std::string& key) const { return kv_.contains(key); }

  std::string str(const std::string& key, std::string fallback) {
    auto v = kv_.get(key);
    return v ? *v : fallback;
  }

  double real(const std::string& key, double fallback) {
    auto v = kv_.get(key);
    if (!v) return fallback;
    double out = 0.0;
    if (!to_real(*v, out)) issue(key, "expected a real number, got `" + *v + "`");
    return out;
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    auto v = kv_.get(key);
    if (!v) return fallback;
    std::int64_t out = 0;
    const char* end = v->data() + v->size();
    auto [ptr, ec] = std::from_chars(v->data(), end, out);
    if (ec != std::errc{} || ptr != end) issue(key, "expected an integer, got `" + *v + "`");
    return out;
  }

  bool boolean(const std::string& key, bool fallback) {
    auto v = kv_.get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    issue(key, "expected a boolean, got `" + *v + "`");
    return fallback;
  }

  std::vector<double> reals(const std::string& key, std::vector<double> fallback) {
    auto v = kv_.get(key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const auto& item : split(*v, ',')) {
      double x = 0.0;
      if (!to_real(item, x)) {
        issue(key, "expected a comma-separated list of reals, got `" + *v + "`");
        return fallback;
      }
      out.push_back(x);
    }
    if (out.empty()) issue(key, "list must not be empty");
    return out;
  }

  void issue(const std::string& key, std::string message) {
    issues_.push_back({prefix_ + key, std::move(message)});
  }

  static std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
      auto pos = text.find(sep, start);
      if (pos == std::string::npos) pos = text.size();
      std::string item = text.substr(start, pos - start);
      const auto a = item.find_first_not_of(" \t");
      const auto b = item.find_last_not_of(" \t");
      item = a == std::string::npos ? std::string{} : item.substr(a, b - a + 1);
      if (!item.empty()) out.push_back(item);
      start = pos + 1;
    }
    return out;
  }

 private:
  static bool to_real(const std::string& s, double& out) {
    if (s == "inf" || s == "+inf") {
      out = kInf;
      return true;
    }
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc{} && ptr == end && !s.empty();
  }

  const KeyValues& kv_;
  std::string prefix_;
  std::vector<ConfigIssue> issues_;
};

std::vector<LayerRange> parse_layers(Reader& r, const std::string& text) {
  std::vector<LayerRange> out;
  for (const auto& item : Reader::split(text, ',')) {
    const auto colon = item.find(':');
    std::size_t lo = 0;
    std::size_t hi = 0;
    bool ok = colon != std::string::npos;
    if (ok) {
      const char* a = item.data();
      auto r1 = std::from_chars(a, a + colon, lo);
      auto r2 = std::from_chars(a + colon + 1, a + item.size(), hi);
      ok = r1.ec == std::errc{} && r1.ptr == a + colon && r2.ec == std::errc{} && r2.ptr == a + item.size();
    }
    if (!ok) {
      r.issue("clip.layers", "expected `begin:end` ranges, got `" + item + "`");
      return {};
    }
    out.push_back({lo, hi});
  }
  return out;
}

bool is_method_key(const std::string& key) { return key == "methods" || key.rfind("method.", 0) == 0; }

// Method a `method.<name>.<key>` entry belongs to. Names may contain dots, so
// the longest declared name wins; empty when none matches.
std::string owner_of(const std::string& key, const std::vector<std::string>& names) {
  std::string best;
  for (const auto& n : names) {
    const std::string prefix = "method." + n + ".";
    if (key.size() > prefix.size() && key.rfind(prefix, 0) == 0 && n.size() > best.size()) best = n;
  }
  return best;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
// exception after all workers stop.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "label",
      "problem",
      "problem.dim",
      "problem.nu",
      "x0",
      "noise",
      "noise.sigma",
      "optimizer.variant",
      "optimizer.family",
      "optimizer.gamma",
      "optimizer.delay",
      "optimizer.eta",
      "optimizer.b_init",
      "optimizer.beta1",
      "optimizer.beta2",
      "optimizer.bias_correction",
      "clip.mode",
      "clip.lambda",
      "clip.layers",
      "T",
      "seeds",
      "base_seed",
      "metric",
      "percentiles",
      "record_every",
      "failure.epsilon",
      "theory.delta",
      "theory.alpha",
      "theory.radius",
      "theory.sigma",
      "verify.bound_multiplier",
      "output.ensemble",
      "output.bands",
      "output.summary",
      "output.svg",
  };
  return keys;
}

ExperimentConfig parse_experiment(const KeyValues& kv) {
  Reader r(kv);
  const std::set<std::string> known(config_keys().begin(), config_keys().end());
  for (const auto& [key, value] : kv.entries()) {
    if (is_method_key(key)) {
      r.issue(key, "comparison keys are only valid for `compare`");
    } else if (!known.contains(key)) {
      r.issue(key, "unknown key");
    }
  }

  ExperimentConfig c;
  c.label = r.str("label", c.label);

  c.problem.kind = r.str("problem", c.problem.kind);
  if (c.problem.kind != "quadratic" && c.problem.kind != "huber") {
    r.issue("problem", "expected `quadratic` or `huber`");
  }
  const auto dim = r.integer("problem.dim", 1);
  if (dim < 1) r.issue("problem.dim", "must be >= 1");
  c.problem.dim = static_cast<std::size_t>(std::max<std::int64_t>(dim, 1));
  c.problem.huber_nu = r.real("problem.nu", c.problem.huber_nu);
  if (c.problem.kind == "huber") {
    if (c.problem.dim != 1) r.issue("problem.dim", "the Huber problem is one-dimensional");
    if (!(c.problem.huber_nu > 0.0)) r.issue("problem.nu", "must be positive");
  }

  c.x0 = r.reals("x0", c.x0);
  if (c.x0.size() == 1 && c.problem.dim > 1) c.x0.assign(c.problem.dim, c.x0[0]);
  if (c.x0.size() != c.problem.dim) r.issue("x0", "length must be 1 or problem.dim");

  c.noise.kind = r.str("noise", c.noise.kind);
  c.noise.sigma = r.real("noise.sigma", c.noise.sigma);
  static const std::set<std::string> noise_kinds = {"none", "pareto_symmetric", "adv_adagrad", "adv_adagradd"};
  if (!noise_kinds.contains(c.noise.kind)) {
    r.issue("noise", "expected none, pareto_symmetric, adv_adagrad or adv_adagradd");
  }
  if (!(c.noise.sigma >= 0.0) || !std::isfinite(c.noise.sigma)) r.issue("noise.sigma", "must be >= 0");
  if ((c.noise.kind == "adv_adagrad" || c.noise.kind == "adv_adagradd") && c.problem.kind != "huber") {
    r.issue("noise", "adversarial noise is defined on the Huber problem");
  }

  // Optimizer: an optional preset, then explicit field overrides.
  const double gamma = r.real("optimizer.gamma", 1.0);
  const auto b_init = r.reals("optimizer.b_init", {1.0});
  const double level = r.real("clip.lambda", 1.0);
  if (r.has("optimizer.variant")) {
    const auto name = r.str("optimizer.variant", "");
    auto preset = presets::by_name(name, gamma, b_init.front(), level);
    if (preset) {
      c.optimizer = *preset;
    } else {
      r.issue("optimizer.variant", "unknown variant `" + name + "`");
    }
  }
  c.optimizer.gamma = gamma;
  c.optimizer.b_init = b_init;
  if (r.has("optimizer.family")) {
    const auto fam = r.str("optimizer.family", "");
    if (fam == "adagrad_norm" || fam == "adagrad") {
      c.optimizer.family = Family::adagrad_norm;
    } else if (fam == "adam") {
      c.optimizer.family = Family::adam;
    } else if (fam == "sgd") {
      c.optimizer.family = Family::sgd;
    } else {
      r.issue("optimizer.family", "expected adagrad_norm, adam or sgd");
    }
  }
  c.optimizer.delay = r.boolean("optimizer.delay", c.optimizer.delay);
  c.optimizer.eta = r.real("optimizer.eta", c.optimizer.eta);
  c.optimizer.beta1 = r.real("optimizer.beta1", c.optimizer.beta1);
  c.optimizer.beta2 = r.real("optimizer.beta2", c.optimizer.beta2);
  c.optimizer.bias_correction = r.boolean("optimizer.bias_correction", c.optimizer.bias_correction);

  if (r.has("clip.mode")) {
    const auto mode = r.str("clip.mode", "");
    if (mode == "none") {
      c.optimizer.clip.reset();
    } else if (mode == "global") {
      c.optimizer.clip = ClipSpec{ClipMode::global, level, {}};
    } else if (mode == "coordinate") {
      c.optimizer.clip = ClipSpec{ClipMode::coordinate, level, {}};
    } else if (mode == "layer") {
      c.optimizer.clip = ClipSpec{ClipMode::layer, level, parse_layers(r, r.str("clip.layers", ""))};
    } else {
      r.issue("clip.mode", "expected none, global, coordinate or layer");
    }
  } else if (c.optimizer.clip) {
    c.optimizer.clip->level = level;
  }
  if (r.has("clip.layers") && (!c.optimizer.clip || c.optimizer.clip->mode != ClipMode::layer)) {
    r.issue("clip.layers", "only valid with clip.mode = layer");
  }
  try {
    c.optimizer.validate(c.problem.dim);
  } catch (const InvalidArgument& e) {
    r.issue("optimizer", e.what());
  }
  if (c.noise.kind == "adv_adagradd" &&
      (c.optimizer.family != Family::adagrad_norm || !c.optimizer.delay)) {
    r.issue("noise", "adv_adagradd targets delayed AdaGrad-Norm runs");
  }

  c.steps = r.integer("T", c.steps);
  if (c.steps < 1) r.issue("T", "must be >= 1");
  const auto seeds = r.integer("seeds", static_cast<std::int64_t>(c.n_seeds));
  if (seeds < 1) r.issue("seeds", "must be >= 1");
  c.n_seeds = static_cast<std::size_t>(std::max<std::int64_t>(seeds, 1));
  const auto base = r.integer("base_seed", 0);
  if (base < 0) r.issue("base_seed", "must be >= 0");
  c.base_seed = static_cast<std::uint64_t>(std::max<std::int64_t>(base, 0));
  try {
    c.metric = parse_metric(r.str("metric", to_string(c.metric)));
  } catch (const InvalidArgument& e) {
    r.issue("metric", e.what());
  }
  c.percentiles = r.reals("percentiles", c.percentiles);
  for (double p : c.percentiles) {
    if (!(p >= 0.0 && p <= 1.0)) r.issue("percentiles", "values must lie in [0, 1]");
  }
  c.record_every = r.integer("record_every", c.record_every);
  if (c.record_every < 1) r.issue("record_every", "must be >= 1");
  c.failure_epsilon = r.real("failure.epsilon", c.failure_epsilon);
  if (!(c.failure_epsilon > 0.0)) r.issue("failure.epsilon", "must be positive");

  c.theory.delta = r.real("theory.delta", c.theory.delta);
  if (!(c.theory.delta > 0.0 && c.theory.delta <= 1.0)) r.issue("theory.delta", "must lie in (0, 1]");
  c.theory.alpha = r.real("theory.alpha", c.theory.alpha);
  if (!(c.theory.alpha > 1.0 && c.theory.alpha <= 2.0)) r.issue("theory.alpha", "must lie in (1, 2]");
  c.theory.radius = r.real("theory.radius", c.theory.radius);
  if (!(c.theory.radius >= 0.0)) r.issue("theory.radius", "must be >= 0");
  c.theory.sigma = r.real("theory.sigma", c.theory.sigma);
  if (!(c.theory.sigma >= 0.0)) r.issue("theory.sigma", "must be >= 0");
  c.theory.bound_multiplier = r.real("verify.bound_multiplier", c.theory.bound_multiplier);
  if (!(c.theory.bound_multiplier > 0.0)) r.issue("verify.bound_multiplier", "must be positive");

  c.outputs.ensemble = r.str("output.ensemble", c.outputs.ensemble);
  c.outputs.bands = r.str("output.bands", c.outputs.bands);
  c.outputs.summary = r.str("output.summary", c.outputs.summary);
  c.outputs.svg = r.str("output.svg", c.outputs.svg);

  if (!r.issues().empty()) throw ConfigError(std::move(r.issues()));
  c.config_hash = fnv1a64(kv.canonical());
  return c;
}

std::vector<ExperimentConfig> parse_comparison(const KeyValues& kv) {
  if (!kv.contains("methods")) {
    for (const auto& [key, value] : kv.entries()) {
      if (is_method_key(key)) throw ConfigError(key, "method overrides need a `methods` list");
    }
    return {parse_experiment(kv)};
  }
  const auto names = Reader::split(*kv.get("methods"), ',');
  if (names.empty()) throw ConfigError("methods", "list must not be empty");
  std::vector<ConfigIssue> issues;
  const std::set<std::string> declared(names.begin(), names.end());
  if (declared.size() != names.size()) issues.push_back({"methods", "method names must be unique"});
  for (const auto& [key, value] : kv.entries()) {
    if (key.rfind("method.", 0) != 0) continue;
    if (owner_of(key, names).empty()) issues.push_back({key, "does not name a declared method"});
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));

  std::vector<ExperimentConfig> out;
  for (const auto& name : names) {
    KeyValues m;
    for (const auto& [key, value] : kv.entries()) {
      if (!is_method_key(key)) m.set(key, value);
    }
    m.set("label", name);
    if (std::find(presets::names().begin(), presets::names().end(), name) != presets::names().end()) {
      m.set("optimizer.variant", name);
    }
    const std::string prefix = "method." + name + ".";
    for (const auto& [key, value] : kv.entries()) {
      if (owner_of(key, names) == name) m.set(key.substr(prefix.size()), value);
    }
    try {
      out.push_back(parse_experiment(m));
    } catch (const ConfigError& e) {
      for (const auto& i : e.issues()) issues.push_back({prefix + i.path, i.message});
    }
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return out;
}

StochasticProblem build_problem(const ExperimentConfig& c) {
  StochasticProblem p;
  p.objective = c.problem.kind == "huber" ? make_huber(c.problem.huber_nu) : make_quadratic(c.problem.dim);
  p.noise = NoiseOracle::none();
  if (c.noise.kind == "pareto_symmetric") {
    p.noise = c.noise.sigma > 0.0 ? NoiseOracle::heavy_tail(c.noise.sigma) : NoiseOracle::none();
  } else if (c.noise.kind == "adv_adagrad") {
    p.noise = adagrad_adversarial_oracle(c.x0.at(0), c.optimizer.gamma, c.problem.huber_nu, c.noise.sigma,
                                         c.steps);
  } else if (c.noise.kind == "adv_adagradd") {
    // Two-pass protocol: the deterministic run fixes x_hat_K and b_{K-1}.
    Rng rng(c.seed(0));
    const auto reference = run(p, c.optimizer, c.x0, c.steps, rng);
    p.noise = adagradd_adversarial_oracle(reference, c.optimizer.gamma, c.problem.huber_nu, c.noise.sigma,
                                          c.steps);
  }
  return p;
}

std::size_t TrajectoryEnsemble::failures() const {
  return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const Trajectory& t) { return t.failed; }));
}

TrajectoryEnsemble run_experiment(const ExperimentConfig& config, std::size_t jobs) {
  const auto problem = build_problem(config);
  TrajectoryEnsemble ens;
  ens.config_hash = config.config_hash;
  ens.label = config.label;
  ens.seeds.resize(config.n_seeds);
  ens.runs.resize(config.n_seeds);
  RunOptions options;
  options.record_every = config.record_every;
  options.keep_iterates = false;
  parallel_for(config.n_seeds, jobs, [&](std::size_t i) {
    ens.seeds[i] = config.seed(i);
    Rng rng(ens.seeds[i]);
    ens.runs[i] = run(problem, config.optimizer, config.x0, config.steps, rng, options);
  });
  return ens;
}

std::vector<std::vector<double>> metric_curves(const TrajectoryEnsemble& ens, Metric metric,
                                               std::vector<std::int64_t>* steps) {
  if (ens.runs.empty()) throw InvalidArgument("empty ensemble");
  // The step grid comes from a run that completed; failed runs are prefixes.
  const Trajectory* ref = nullptr;
  for (const auto& t : ens.runs) {
    if (!t.failed) {
      ref = &t;
      break;
    }
  }
  if (!ref) {
    ref = &*std::max_element(ens.runs.begin(), ens.runs.end(), [](const Trajectory& a, const Trajectory& b) {
      return a.records.size() < b.records.size();
    });
  }
  const std::size_t len = ref->records.size();
  std::vector<std::vector<double>> curves;
  curves.reserve(ens.runs.size());
  for (const auto& t : ens.runs) {
    if (t.records.size() > len || (!t.failed && t.records.size() != len)) {
      throw InvalidArgument("ragged ensemble: runs record different steps");
    }
    std::vector<double> c(len, kInf);
    for (std::size_t j = 0; j < t.records.size(); ++j) {
      if (t.records[j].step != ref->records[j].step) {
        throw InvalidArgument("ragged ensemble: runs record different steps");
      }
      c[j] = t.records[j].metric(metric);
    }
    curves.push_back(std::move(c));
  }
  if (steps) {
    steps->clear();
    for (const auto& r : ref->records) steps->push_back(r.step);
  }
  return curves;
}

metrics::Bands ensemble_bands(const TrajectoryEnsemble& ens, Metric metric, const std::vector<double>& probs) {
  std::vector<std::int64_t> steps;
  const auto curves = metric_curves(ens, metric, &steps);
  return metrics::percentile_bands(curves, probs, std::move(steps));
}

metrics::FailureEstimate ensemble_failure(const TrajectoryEnsemble& ens, Metric metric, double eps) {
  const auto curves = metric_curves(ens, metric);
  std::vector<double> finals;
  finals.reserve(curves.size());
  // A failed run counts as a failure even when every recorded value is finite.
  for (std::size_t i = 0; i < curves.size(); ++i) finals.push_back(ens.runs[i].failed ? kInf : curves[i].back());
  return metrics::empirical_failure_prob(finals, eps);
}

ComparisonReport compare(const std::vector<ExperimentConfig>& configs, std::size_t jobs) {
  if (configs.empty()) throw InvalidArgument("compare needs at least one config");
  const auto& first = configs.front();
  for (const auto& c : configs) {
    if (c.steps != first.steps) throw InvalidArgument("compared configs must share T");
    if (c.n_seeds != first.n_seeds || c.base_seed != first.base_seed) {
      throw InvalidArgument("compared configs must share seeds");
    }
    if (c.problem.kind != first.problem.kind || c.problem.dim != first.problem.dim ||
        c.problem.huber_nu != first.problem.huber_nu || c.x0 != first.x0) {
      throw InvalidArgument("compared configs must share the problem");
    }
    if (c.noise.kind != first.noise.kind || c.noise.sigma != first.noise.sigma) {
      throw InvalidArgument("compared configs must share the noise model");
    }
  }
  ComparisonReport report;
  for (const auto& c : configs) {
    MethodReport m;
    m.label = c.label;
    m.ensemble = run_experiment(c, jobs);
    m.bands = ensemble_bands(m.ensemble, c.metric, c.percentiles);
    m.failure = ensemble_failure(m.ensemble, c.metric, c.failure_epsilon);
    report.methods.push_back(std::move(m));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Failure constructions.

namespace {

struct ForcedRun {
  double x1 = 0.0;
  double b_after_first = 0.0;
  double x_final = 0.0;
};

// Zero-noise run except for the value `noise` added at step `trigger`.
ForcedRun forced_run(const Objective& f, const OptimizerConfig& cfg, double x0, std::int64_t steps,
                     std::int64_t trigger, double noise) {
  OptimizerState state = init_state(cfg, {x0});
  ForcedRun out;
  double g[1];
  for (std::int64_t t = 0; t < steps; ++t) {
    f.gradient(state.x, g);
    if (t == trigger) g[0] += noise;
    step(state, cfg, g);
    if (t == 0) {
      out.x1 = state.x[0];
      out.b_after_first = state.b[0];
    }
  }
  out.x_final = state.x[0];
  return out;
}

}  // namespace

FailureConstructionReport verify_failure_construction(const FailureParams& p, std::size_t jobs) {
  if (p.steps < 1 || p.replays < 1) throw InvalidArgument("construction needs K >= 1 and at least one replay");
  FailureConstructionReport rep;
  rep.params = p;
  rep.epsilon = p.nu * p.nu / 2.0;
  const bool delayed = p.kind == ConstructionKind::adagradd;
  const auto cfg = delayed ? presets::adagradd(p.gamma, p.b_init) : presets::adagrad(p.gamma, p.b_init);
  const auto f = make_huber(p.nu);
  const theory::HuberScenario base{p.x0, p.gamma, p.nu, p.b_init};
  const auto K = p.steps;

  StochasticProblem problem{f, NoiseOracle::none()};
  std::int64_t trigger = 0;
  if (delayed) {
    Rng ref_rng(p.base_seed);
    const auto reference = run(problem, cfg, {p.x0}, K, ref_rng);
    problem.noise = adagradd_adversarial_oracle(reference, p.gamma, p.nu, p.sigma, K);
    rep.reference_threshold = theory::adagradd_iteration_threshold(base);
    trigger = K - 1;
    rep.unkicked.final_x = reference.iterate(reference.records.size() - 1)[0];
  } else {
    problem.noise = adagrad_adversarial_oracle(p.x0, p.gamma, p.nu, p.sigma, K);
    rep.reference_threshold = theory::adagrad_iteration_threshold(base);
    rep.unkicked.final_x = forced_run(f, cfg, p.x0, K, -1, 0.0).x_final;
  }
  rep.oracle_active = problem.noise.active();
  rep.unkicked.threshold = rep.reference_threshold;
  rep.unkicked.final_suboptimality = f.value(std::vector<double>{rep.unkicked.final_x}) - f.min_value;
  rep.unkicked.fails = rep.unkicked.final_suboptimality >= rep.epsilon;

  if (rep.oracle_active) {
    rep.amplitude = problem.noise.amplitude();
    rep.activation_prob = 1.0 / (rep.amplitude * rep.amplitude);
    rep.consequence_holds = true;
    for (double xi : {-rep.amplitude, rep.amplitude}) {
      ConstructionBranch br;
      br.xi = xi;
      // The construction's stochastic gradient is grad f - sigma xi.
      const auto fr = forced_run(f, cfg, p.x0, K, trigger, -p.sigma * xi);
      br.final_x = fr.x_final;
      br.final_suboptimality = f.value(std::vector<double>{br.final_x}) - f.min_value;
      br.fails = br.final_suboptimality >= rep.epsilon;
      if (delayed) {
        br.threshold = rep.reference_threshold;
        rep.consequence_holds = rep.consequence_holds && std::abs(br.final_x) >= p.nu;
      } else {
        // The K - 1 remaining steps restart deterministic AdaGrad from x_1
        // with the inflated accumulator b_0.
        br.threshold = theory::adagrad_iteration_threshold({fr.x1, p.gamma, p.nu, fr.b_after_first});
        rep.consequence_holds = rep.consequence_holds && br.final_suboptimality > rep.epsilon &&
                                static_cast<double>(K - 1) < br.threshold;
      }
      rep.kicked.push_back(br);
    }
    const double p_half = rep.activation_prob / 2.0;
    rep.expected_failure_prob = p_half * (rep.kicked[0].fails ? 1.0 : 0.0) +
                                p_half * (rep.kicked[1].fails ? 1.0 : 0.0) +
                                (1.0 - rep.activation_prob) * (rep.unkicked.fails ? 1.0 : 0.0);
  } else {
    rep.expected_failure_prob = rep.unkicked.fails ? 1.0 : 0.0;
  }

  // Lower bound at the confidence level the construction achieves.
  if (rep.oracle_active) {
    const double delta = rep.activation_prob;
    try {
      if (delayed) {
        rep.lower_bound_K = theory::adagradd_lower_bound_K(rep.epsilon, delta, p.sigma, p.x0, p.nu, p.gamma, p.b_init);
      } else {
        rep.lower_bound_K = theory::adagrad_lower_bound_K(rep.epsilon, delta, p.sigma, p.gamma, p.x0, p.b_init);
      }
    } catch (const ConstructionInfeasible&) {
      rep.lower_bound_feasible = false;
    }
  } else {
    rep.lower_bound_feasible = false;
  }

  // Deterministic success of the unkicked run forces K past its threshold.
  rep.consistent = rep.unkicked.fails || rep.reference_threshold <= static_cast<double>(K);
  if (!delayed && rep.consequence_holds) {
    // The amplitude is calibrated so that the lower bound at delta = 1/A^2
    // recovers K, up to rounding.
    rep.consistent = rep.consistent && rep.lower_bound_feasible &&
                     rep.lower_bound_K <= static_cast<double>(K) * (1.0 + 1e-9);
  }

  std::vector<char> activated(p.replays, 0);
  std::vector<char> failed(p.replays, 0);
  RunOptions options;
  options.record_every = K;
  options.keep_iterates = false;
  parallel_for(p.replays, jobs, [&](std::size_t i) {
    Rng rng(p.base_seed + i);
    RunOptions local = options;
    bool hit = false;
    local.observer = [&](std::int64_t t, const GradientSample& s) {
      if (t == trigger && s.noise[0] != 0.0) hit = true;
    };
    const auto traj = run(problem, cfg, {p.x0}, K, rng, local);
    activated[i] = hit;
    failed[i] = traj.failed || !(traj.final_record().suboptimality < rep.epsilon);
  });
  rep.activations = static_cast<std::size_t>(std::count(activated.begin(), activated.end(), 1));
  rep.failures = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
  const double n = static_cast<double>(p.replays);
  rep.activation_freq = static_cast<double>(rep.activations) / n;
  rep.failure_freq = static_cast<double>(rep.failures) / n;
  rep.ci99_half_width = metrics::binomial_half_width(rep.activation_prob, p.replays, 2.576);
  rep.activation_matches = std::abs(rep.activation_freq - rep.activation_prob) <= rep.ci99_half_width;
  const double fail_hw = metrics::binomial_half_width(rep.expected_failure_prob, p.replays, 2.576);
  rep.failure_matches = std::abs(rep.failure_freq - rep.expected_failure_prob) <= fail_hw;
  rep.passed = rep.oracle_active && rep.consequence_holds && rep.consistent && rep.activation_matches &&
               rep.failure_matches;
  return rep;
}

FailureParams failure_params_from(const ExperimentConfig& c, ConstructionKind kind) {
  FailureParams p;
  p.kind = kind;
  p.x0 = c.x0.at(0);
  p.gamma = c.optimizer.gamma;
  p.nu = c.problem.huber_nu;
  p.sigma = c.noise.sigma;
  p.b_init = c.optimizer.b_init.at(0);
  p.steps = c.steps;
  p.replays = c.n_seeds;
  p.base_seed = c.base_seed;
  return p;
}

// ---------------------------------------------------------------------------
// High-probability convex bound.

ConvexTheoremReport verify_convex_theorem(const ConvexCheckParams& p, std::size_t jobs) {
  if (p.n_seeds < 1) throw InvalidArgument("convex check needs at least one seed");
  if (!(p.noise_scale >= 0.0)) throw InvalidArgument("noise scale must be >= 0");
  ConvexTheoremReport rep;
  rep.params = p;
  rep.radius = p.radius > 0.0 ? p.radius : std::abs(p.x0);
  if (p.sigma > 0.0) {
    rep.sigma = p.sigma;
  } else {
    rep.sigma = p.noise_scale == 0.0 ? 0.0 : p.noise_scale * theory::heavy_tail_sigma(p.alpha);
  }
  const auto objective = make_quadratic(1);
  rep.theory = theory::convex_params(
      {p.steps, p.delta, objective.smoothness, rep.sigma, p.alpha, p.b0, rep.radius});
  rep.bound = p.bound_multiplier * 2.0 * rep.radius * rep.radius;

  const auto cfg = presets::clip_radagradd(rep.theory.gamma, p.b0, rep.theory.lambda, rep.theory.eta);
  const StochasticProblem problem{
      objective, p.noise_scale > 0.0 ? NoiseOracle::heavy_tail(p.noise_scale) : NoiseOracle::none()};
  rep.weighted_sums.assign(p.n_seeds, 0.0);
  RunOptions options;
  options.keep_iterates = false;
  parallel_for(p.n_seeds, jobs, [&](std::size_t i) {
    Rng rng(p.base_seed + i);
    // K + 1 iterations yield x_0 .. x_{K+1}; the sum runs over k = 0 .. K.
    const auto traj = run(problem, cfg, {p.x0}, p.steps + 1, rng, options);
    if (traj.failed) {
      rep.weighted_sums[i] = kInf;
      return;
    }
    double sum = 0.0;
    for (std::int64_t k = 0; k <= p.steps; ++k) {
      const auto& r = traj.records[static_cast<std::size_t>(k)];
      sum += rep.theory.gamma / r.accumulator * r.suboptimality;
    }
    rep.weighted_sums[i] = sum;
  });
  rep.passes = static_cast<std::size_t>(std::count_if(rep.weighted_sums.begin(), rep.weighted_sums.end(),
                                                      [&](double s) { return s <= rep.bound; }));
  const double n = static_cast<double>(p.n_seeds);
  rep.pass_fraction = static_cast<double>(rep.passes) / n;
  rep.required_fraction = 1.0 - p.delta - metrics::binomial_half_width(p.delta, p.n_seeds, 1.96);
  rep.passed = rep.pass_fraction >= rep.required_fraction;
  return rep;
}

ConvexCheckParams convex_params_from(const ExperimentConfig& c) {
  if (c.problem.kind != "quadratic" || c.problem.dim != 1) {
    throw ConfigError("problem", "the convex check runs on the one-dimensional quadratic");
  }
  if (c.noise.kind != "none" && c.noise.kind != "pareto_symmetric") {
    throw ConfigError("noise", "the convex check uses none or pareto_symmetric noise");
  }
  ConvexCheckParams p;
  p.steps = c.steps;
  p.delta = c.theory.delta;
  p.n_seeds = c.n_seeds;
  p.base_seed = c.base_seed;
  p.x0 = c.x0.at(0);
  p.b0 = c.optimizer.b_init.at(0);
  p.alpha = c.theory.alpha;
  p.noise_scale = c.noise.kind == "none" ? 0.0 : c.noise.sigma;
  p.radius = c.theory.radius;
  p.sigma = c.theory.sigma;
  p.bound_multiplier = c.theory.bound_multiplier;
  return p;
}

}  // namespace clipada
