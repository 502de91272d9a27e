// SPDX-License-Identifier: Apache-2.0

#include "clipada/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <ostream>
#include <thread>

#include <boost/math/special_functions/erf.hpp>

#include "CLI11.hpp"
#include "clipada/errors.hpp"
#include "clipada/harness.hpp"
#include "clipada/io.hpp"

namespace clipada::cli {

namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> sets;
  std::int64_t seeds = 0;
  std::size_t jobs = 0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Config file (key = value lines)");
  app->add_option("--out", c.out, std::string("Output directory (default: $") + kOutputEnv + " or .)");
  app->add_option("--set", c.sets, "Override a config key: key=value (repeatable)");
  app->add_option("--seeds", c.seeds, "Override the number of seeds / replays")->check(CLI::PositiveNumber);
  app->add_option("--jobs", c.jobs, "Worker threads (default: hardware concurrency)")->check(CLI::PositiveNumber);
}

// Built-in defaults, then the config file, then --seeds, then --set.
KeyValues load_config(const Common& c, std::string_view defaults) {
  KeyValues kv = KeyValues::parse(defaults, "<defaults>");
  if (!c.config.empty()) {
    const auto file = KeyValues::load(c.config);
    for (const auto& [k, v] : file.entries()) kv.set(k, v);
  }
  if (c.seeds > 0) kv.set("seeds", std::to_string(c.seeds));
  for (const auto& s : c.sets) kv.apply_override(s);
  return kv;
}

fs::path output_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
  return ".";
}

std::size_t jobs_of(const Common& c) {
  if (c.jobs > 0) return c.jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

void write_json(const fs::path& path, const nlohmann::json& j) { io::write_file_atomic(path, j.dump(2) + "\n"); }

std::string y_label(Metric m) {
  switch (m) {
    case Metric::suboptimality: return "f(x_t) - f*";
    case Metric::squared_distance: return "|x_t - x*|^2";
    case Metric::grad_norm_sq: return "|grad f(x_t)|^2";
  }
  return "";
}

std::string pass_text(bool ok) { return ok ? "PASS" : "FAIL"; }

// |a - b| in units in the last place of the double b; a may carry extra
// precision so that the check itself adds no rounding.
double ulps(long double a, long double b) {
  if (a == b) return 0.0;
  const double bd = static_cast<double>(b);
  const double spacing = std::nextafter(std::abs(bd), INFINITY) - std::abs(bd);
  return static_cast<double>(std::abs(a - b) / spacing);
}

// ---------------------------------------------------------------------------

int cmd_run(const Common& c, std::ostream& out) {
  const auto cfg = parse_experiment(load_config(c, ""));
  const auto dir = output_dir(c);
  const auto ens = run_experiment(cfg, jobs_of(c));
  const auto bands = ensemble_bands(ens, cfg.metric, cfg.percentiles);
  const auto failure = ensemble_failure(ens, cfg.metric, cfg.failure_epsilon);
  io::write_file_atomic(dir / cfg.outputs.ensemble, io::ensemble_csv(ens));
  io::write_file_atomic(dir / cfg.outputs.bands, io::bands_csv(bands));
  write_json(dir / cfg.outputs.summary, io::summary_json(cfg, ens, bands, failure));
  io::write_file_atomic(dir / cfg.outputs.svg, io::bands_svg({{cfg.label, bands}}, cfg.label, y_label(cfg.metric)));
  out << cfg.label << ": " << cfg.n_seeds << " seeds x " << cfg.steps << " steps, " << ens.failures()
      << " poisoned; P{" << to_string(cfg.metric) << " >= " << io::format_double(cfg.failure_epsilon)
      << "} = " << io::format_double(failure.probability) << "\n";
  out << "wrote " << (dir / cfg.outputs.ensemble).string() << ", " << (dir / cfg.outputs.bands).string() << ", "
      << (dir / cfg.outputs.summary).string() << ", " << (dir / cfg.outputs.svg).string() << "\n";
  return kExitOk;
}

int cmd_compare(const Common& c, std::ostream& out) {
  const auto configs = parse_comparison(load_config(c, ""));
  const auto dir = output_dir(c);
  const auto report = compare(configs, jobs_of(c));
  std::vector<std::pair<std::string, metrics::Bands>> series;
  nlohmann::json methods = nlohmann::json::array();
  for (std::size_t i = 0; i < report.methods.size(); ++i) {
    const auto& m = report.methods[i];
    const auto& cfg = configs[i];
    io::write_file_atomic(dir / (m.label + "." + cfg.outputs.ensemble), io::ensemble_csv(m.ensemble));
    io::write_file_atomic(dir / (m.label + "." + cfg.outputs.bands), io::bands_csv(m.bands));
    methods.push_back(io::summary_json(cfg, m.ensemble, m.bands, m.failure));
    series.emplace_back(m.label, m.bands);
    out << m.label << ": final";
    for (std::size_t k = 0; k < m.bands.probs.size(); ++k) {
      out << " q" << io::format_double(m.bands.probs[k]) << "=" << io::format_double(m.bands.values[k].back());
    }
    out << "  P{fail}=" << io::format_double(m.failure.probability) << "\n";
  }
  const auto& first = configs.front();
  write_json(dir / first.outputs.summary, {{"methods", methods}});
  io::write_file_atomic(dir / first.outputs.svg, io::bands_svg(series, "comparison", y_label(first.metric)));
  out << "wrote " << report.methods.size() << " method(s) to " << dir.string() << "\n";
  return kExitOk;
}

constexpr std::string_view kTheoryDefaults =
    "problem = huber\nproblem.nu = 0.01\nx0 = 2\noptimizer.gamma = 0.1\noptimizer.b_init = 1\nT = 1000\n"
    "theory.delta = 0.01\n";

int cmd_verify_theory(const Common& c, std::ostream& out) {
  const auto cfg = parse_experiment(load_config(c, kTheoryDefaults));
  const theory::HuberScenario sc{cfg.x0.at(0), cfg.optimizer.gamma, cfg.problem.huber_nu, cfg.optimizer.b_init.at(0)};
  nlohmann::json rows = nlohmann::json::array();
  bool all = true;
  auto row = [&](const std::string& name, const std::string& value, bool ok) {
    out << "  " << (ok ? "PASS " : "FAIL ") << name << ": " << value << "\n";
    rows.push_back({{"check", name}, {"value", value}, {"passed", ok}});
    all = all && ok;
  };

  out << "Huber scenario x0=" << io::format_double(sc.x0) << " gamma=" << io::format_double(sc.gamma)
      << " nu=" << io::format_double(sc.nu) << " b=" << io::format_double(sc.b) << " T=" << cfg.steps << "\n";
  const auto huber = make_huber(sc.nu);
  const StochasticProblem det{huber, NoiseOracle::none()};
  for (bool delayed : {false, true}) {
    const std::string tag = delayed ? "AdaGradD" : "AdaGrad";
    const auto opt = delayed ? presets::adagradd(sc.gamma, sc.b) : presets::adagrad(sc.gamma, sc.b);
    try {
      const double thr = delayed ? theory::adagradd_iteration_threshold(sc) : theory::adagrad_iteration_threshold(sc);
      // Largest integer strictly below the threshold.
      const auto below = static_cast<std::int64_t>(std::ceil(thr)) - 1;
      const std::int64_t T = std::min(cfg.steps, below);
      Rng rng(0);
      const auto traj = run(det, opt, {sc.x0}, std::max<std::int64_t>(below, 1), rng);
      const double sim = traj.iterate(static_cast<std::size_t>(traj.find(T)))[0];
      const double closed = theory::huber_closed_form(sc, T, delayed);
      const double rel = std::abs(sim - closed) / std::abs(closed);
      row(tag + " closed form vs simulation at T=" + std::to_string(T), "rel err " + io::format_double(rel),
          rel <= 1e-12);
      const auto br = theory::huber_iterate_bounds(sc, T, delayed);
      row(tag + " bracket", "[" + io::format_double(br.lower) + ", " + io::format_double(br.upper) + "]",
          br.lower <= closed && closed <= br.upper);
      const double x_below = traj.iterate(traj.records.size() - 1)[0];
      row(tag + " threshold " + io::format_double(thr),
          "x_" + std::to_string(below) + " = " + io::format_double(x_below), below < 1 || x_below > sc.nu);
    } catch (const ValidityError& e) {
      row(tag + " scenario", e.what(), false);
    }
  }

  const double sigma = cfg.theory.sigma > 0.0 ? cfg.theory.sigma : theory::heavy_tail_sigma(cfg.theory.alpha);
  const double radius = cfg.theory.radius > 0.0 ? cfg.theory.radius : std::abs(cfg.x0.at(0));
  const double b0 = cfg.optimizer.b_init.at(0);
  const auto cp = theory::convex_params({cfg.steps, cfg.theory.delta, 1.0, sigma, cfg.theory.alpha, b0, radius});
  out << "convex parameters: gamma=" << io::format_double(cp.gamma) << " lambda=" << io::format_double(cp.lambda)
      << " eta=" << io::format_double(cp.eta) << " A=" << io::format_double(cp.log_factor) << "\n";
  using LD = long double;
  const double u1 = ulps(LD(cp.gamma) * cp.lambda * 40 * cp.log_factor, LD(b0) * radius);
  row("convex gamma lambda 40 A = b0 R", io::format_double(u1) + " ulp", u1 <= 4.0);
  const double u2 = ulps(LD(cp.eta) * radius * radius, LD(cp.gamma) * cp.gamma);
  row("convex eta R^2 = gamma^2", io::format_double(u2) + " ulp", u2 <= 4.0);

  const double gap = radius * radius / 2.0;
  const auto np = theory::nonconvex_params({cfg.steps, cfg.theory.delta, 1.0, sigma, cfg.theory.alpha, b0, gap});
  out << "non-convex parameters: gamma=" << io::format_double(np.gamma) << " (term " << np.binding_term + 1
      << ") lambda=" << io::format_double(np.lambda) << " eta=" << io::format_double(np.eta) << "\n";
  const double a = cfg.theory.alpha;
  const LD lhs = LD(np.lambda) * np.gamma * 20 * np.log_factor *
                     std::pow(static_cast<double>(cfg.steps) + 1.0, (a - 1.0) / (3.0 * a - 2.0));
  const double u3 = ulps(lhs, LD(b0) * std::sqrt(gap));
  row("non-convex lambda identity", io::format_double(u3) + " ulp", u3 <= 4.0);

  const auto ce = theory::clip_effect_bounds(sigma, a, cp.lambda);
  out << "clip-effect bounds at lambda=" << io::format_double(cp.lambda) << ": bias " << io::format_double(ce.bias)
      << ", second moment " << io::format_double(ce.second_moment) << "\n";

  nlohmann::json j = {{"checks", rows},      {"convex", io::to_json(cp)},
                      {"nonconvex", io::to_json(np)}, {"passed", all}};
  write_json(output_dir(c) / "verify_theory.json", j);
  out << pass_text(all) << "\n";
  return all ? kExitOk : kExitVerificationFailed;
}

constexpr std::string_view kFailureDefaults =
    "problem = huber\nproblem.nu = 0.01\nx0 = 2\noptimizer.gamma = 0.1\noptimizer.b_init = 1\n"
    "noise.sigma = 1\nT = 10000\nseeds = 10000\n";

int cmd_verify_failure(const Common& c, const std::string& kind, std::ostream& out) {
  auto kv = load_config(c, kFailureDefaults);
  const auto cfg = parse_experiment(kv);
  const auto ck = kind == "adagrad" ? ConstructionKind::adagrad : ConstructionKind::adagradd;
  const auto rep = verify_failure_construction(failure_params_from(cfg, ck), jobs_of(c));
  out << kind << " construction: K=" << rep.params.steps << " eps=" << io::format_double(rep.epsilon)
      << " A=" << io::format_double(rep.amplitude) << " 1/A^2=" << io::format_double(rep.activation_prob) << "\n";
  out << "  lower bound K >= " << io::format_double(rep.lower_bound_K)
      << (rep.lower_bound_feasible ? "" : " (preconditions not met)") << "\n";
  out << "  reference threshold " << io::format_double(rep.reference_threshold) << ", unkicked x_K "
      << io::format_double(rep.unkicked.final_x) << "\n";
  for (const auto& b : rep.kicked) {
    out << "  xi=" << io::format_double(b.xi) << ": x_K=" << io::format_double(b.final_x)
        << " threshold=" << io::format_double(b.threshold) << (b.fails ? " fails" : " succeeds") << "\n";
  }
  out << "  " << pass_text(rep.oracle_active) << " oracle active\n";
  out << "  " << pass_text(rep.consequence_holds) << " deterministic consequence\n";
  out << "  " << pass_text(rep.consistent) << " internal consistency\n";
  out << "  " << pass_text(rep.activation_matches) << " activation " << rep.activations << "/" << rep.params.replays
      << " vs " << io::format_double(rep.activation_prob) << " +- " << io::format_double(rep.ci99_half_width) << "\n";
  out << "  " << pass_text(rep.failure_matches) << " failures " << rep.failures << "/" << rep.params.replays
      << " vs " << io::format_double(rep.expected_failure_prob) << "\n";
  write_json(output_dir(c) / cfg.outputs.summary, io::to_json(rep));
  out << pass_text(rep.passed) << "\n";
  return rep.passed ? kExitOk : kExitVerificationFailed;
}

constexpr std::string_view kConvexDefaults =
    "problem = quadratic\nx0 = 2\noptimizer.b_init = 1\nnoise = pareto_symmetric\nnoise.sigma = 1\nT = 200\n"
    "seeds = 500\ntheory.delta = 0.1\ntheory.alpha = 1.25\n";

int cmd_verify_convex(const Common& c, std::ostream& out) {
  const auto cfg = parse_experiment(load_config(c, kConvexDefaults));
  const auto rep = verify_convex_theorem(convex_params_from(cfg), jobs_of(c));
  out << "convex check: K=" << rep.params.steps << " delta=" << io::format_double(rep.params.delta)
      << " R=" << io::format_double(rep.radius) << " sigma=" << io::format_double(rep.sigma)
      << " gamma=" << io::format_double(rep.theory.gamma) << " lambda=" << io::format_double(rep.theory.lambda)
      << " eta=" << io::format_double(rep.theory.eta) << "\n";
  out << "  " << rep.passes << "/" << rep.params.n_seeds << " seeds within " << io::format_double(rep.bound)
      << " (fraction " << io::format_double(rep.pass_fraction) << ", required "
      << io::format_double(rep.required_fraction) << ")\n";
  write_json(output_dir(c) / cfg.outputs.summary, io::to_json(rep));
  out << pass_text(rep.passed) << "\n";
  return rep.passed ? kExitOk : kExitVerificationFailed;
}

struct HistArgs {
  std::string noise = "pareto_symmetric";
  std::size_t n = 1000000;
  std::size_t bins = 100;
  double upper = 10.0;
  std::uint64_t seed = 0;
};

int cmd_noise_hist(const Common& c, const HistArgs& h, std::ostream& out) {
  Rng rng(h.seed);
  std::vector<double> signed_draws(h.n);
  std::vector<double> norms(h.n);
  for (std::size_t i = 0; i < h.n; ++i) {
    const double u = rng.uniform_open();
    signed_draws[i] = h.noise == "normal" ? std::numbers::sqrt2 * boost::math::erf_inv(2.0 * u - 1.0)
                                          : heavy_tail_from_uniform(u);
    norms[i] = std::abs(signed_draws[i]);
  }
  const auto hist = io::histogram(norms, h.bins, h.upper);
  // The norm report is what the histogram shows; the signed report compares
  // like with like against the normal reference.
  const auto norm_report = metrics::tail_report(norms);
  const auto signed_report = metrics::tail_report(signed_draws);
  const auto dir = output_dir(c);
  io::write_file_atomic(dir / "noise_hist.csv", io::histogram_csv(hist));
  nlohmann::json j = {{"noise", h.noise},
                      {"n", h.n},
                      {"seed", h.seed},
                      {"norm", io::to_json(norm_report)},
                      {"signed", io::to_json(signed_report)}};
  write_json(dir / "tail_report.json", j);
  out << h.noise << ": n=" << h.n << "\n";
  out << "  |xi|: Q1=" << io::format_double(norm_report.quartiles.q1)
      << " Q3=" << io::format_double(norm_report.quartiles.q3) << " rho_mR=" << io::format_double(norm_report.rho_mild)
      << " rho_eR=" << io::format_double(norm_report.rho_extreme) << "\n";
  out << "  xi:   Q1=" << io::format_double(signed_report.quartiles.q1)
      << " Q3=" << io::format_double(signed_report.quartiles.q3)
      << " rho_mR=" << io::format_double(signed_report.rho_mild)
      << " rho_eR=" << io::format_double(signed_report.rho_extreme) << "\n";
  out << "wrote " << (dir / "noise_hist.csv").string() << ", " << (dir / "tail_report.json").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Clipped and reweighted AdaGrad/Adam experiments under heavy-tailed noise", "clipada"};
  app.require_subcommand(1);

  Common common;
  std::string kind;
  HistArgs hist;
  auto* run_cmd = app.add_subcommand("run", "Run one experiment and write ensemble, bands, summary and SVG");
  auto* cmp_cmd = app.add_subcommand("compare", "Run several methods on common random numbers");
  auto* thy_cmd = app.add_subcommand("verify-theory", "Check closed forms, bounds and parameter identities");
  auto* fail_cmd = app.add_subcommand("verify-failure", "Replay an adversarial construction");
  auto* cvx_cmd = app.add_subcommand("verify-convex", "Check the high-probability convex bound");
  auto* hist_cmd = app.add_subcommand("noise-hist", "Histogram and tail report of noise norms");
  for (auto* sub : {run_cmd, cmp_cmd, thy_cmd, fail_cmd, cvx_cmd, hist_cmd}) add_common(sub, common);
  fail_cmd->add_option("--kind", kind, "adagrad or adagradd")
      ->required()
      ->check(CLI::IsMember({"adagrad", "adagradd"}));
  hist_cmd->add_option("--noise", hist.noise, "pareto_symmetric or normal")
      ->check(CLI::IsMember({"pareto_symmetric", "normal"}));
  hist_cmd->add_option("--n", hist.n, "Number of draws")->check(CLI::Range(std::size_t{4}, std::size_t{1} << 32));
  hist_cmd->add_option("--bins", hist.bins, "Histogram bins")->check(CLI::PositiveNumber);
  hist_cmd->add_option("--upper", hist.upper, "Upper histogram edge")->check(CLI::PositiveNumber);
  hist_cmd->add_option("--seed", hist.seed, "RNG seed");

  std::vector<std::string> argv_rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(argv_rev.begin(), argv_rev.end());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(common, out);
    if (*cmp_cmd) return cmd_compare(common, out);
    if (*thy_cmd) return cmd_verify_theory(common, out);
    if (*fail_cmd) return cmd_verify_failure(common, kind, out);
    if (*cvx_cmd) return cmd_verify_convex(common, out);
    if (*hist_cmd) return cmd_noise_hist(common, hist, out);
  } catch (const ConfigError& e) {
    err << "config error:\n";
    for (const auto& i : e.issues()) err << "  " << i.path << ": " << i.message << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "invalid argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConstructionInfeasible& e) {
    err << "construction infeasible: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidityError& e) {
    err << "validity error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitVerificationFailed;
  }
  return kExitUsage;
}

}  // namespace clipada::cli
