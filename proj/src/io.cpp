// SPDX-License-Identifier: Apache-2.0

#include "clipada/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <system_error>

#include "clipada/errors.hpp"

namespace clipada::io {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Data lines after the expected header; '\r' is tolerated.
std::vector<std::string_view> data_lines(std::string_view text, std::string_view header) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
  }
  if (lines.empty() || lines.front() != header) {
    throw InvalidArgument("CSV header must be `" + std::string(header) + "`");
  }
  lines.erase(lines.begin());
  return lines;
}

template <class Int>
Int parse_int(std::string_view s) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw InvalidArgument("malformed integer `" + std::string(s) + "`");
  }
  return v;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

nlohmann::json number(double v) {
  // JSON has no infinities; non-finite values become strings.
  if (std::isfinite(v)) return v;
  return format_double(v);
}

nlohmann::json branch_json(const ConstructionBranch& b) {
  return {{"xi", number(b.xi)},
          {"final_x", number(b.final_x)},
          {"final_suboptimality", number(b.final_suboptimality)},
          {"threshold", number(b.threshold)},
          {"fails", b.fails}};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 32> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

double parse_double(std::string_view text) {
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InvalidArgument("malformed number `" + std::string(text) + "`");
  }
  return v;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

constexpr std::string_view kEnsembleHeader = "seed,step,suboptimality,squared_distance,grad_norm_sq,accumulator";
constexpr std::string_view kBandsHeader = "step,prob,value";

std::string ensemble_csv(const TrajectoryEnsemble& ens) {
  std::string out(kEnsembleHeader);
  out += '\n';
  for (std::size_t i = 0; i < ens.runs.size(); ++i) {
    const auto seed = std::to_string(ens.seeds.at(i));
    for (const auto& r : ens.runs[i].records) {
      out += seed;
      out += ',';
      out += std::to_string(r.step);
      for (double v : {r.suboptimality, r.squared_distance, r.grad_norm_sq, r.accumulator}) {
        out += ',';
        out += format_double(v);
      }
      out += '\n';
    }
  }
  return out;
}

TrajectoryEnsemble parse_ensemble_csv(std::string_view text) {
  TrajectoryEnsemble ens;
  std::map<std::uint64_t, std::size_t> index;
  for (auto line : data_lines(text, kEnsembleHeader)) {
    const auto f = split_fields(line);
    if (f.size() != 6) throw InvalidArgument("ensemble CSV rows need 6 fields");
    const auto seed = parse_int<std::uint64_t>(f[0]);
    auto [it, inserted] = index.try_emplace(seed, ens.runs.size());
    if (inserted) {
      ens.seeds.push_back(seed);
      ens.runs.emplace_back();
    }
    StepRecord r;
    r.step = parse_int<std::int64_t>(f[1]);
    r.suboptimality = parse_double(f[2]);
    r.squared_distance = parse_double(f[3]);
    r.grad_norm_sq = parse_double(f[4]);
    r.accumulator = parse_double(f[5]);
    ens.runs[it->second].records.push_back(r);
  }
  return ens;
}

std::string bands_csv(const metrics::Bands& bands) {
  std::string out(kBandsHeader);
  out += '\n';
  for (std::size_t t = 0; t < bands.steps.size(); ++t) {
    for (std::size_t k = 0; k < bands.probs.size(); ++k) {
      out += std::to_string(bands.steps[t]);
      out += ',';
      out += format_double(bands.probs[k]);
      out += ',';
      out += format_double(bands.values[k][t]);
      out += '\n';
    }
  }
  return out;
}

metrics::Bands parse_bands_csv(std::string_view text) {
  // padded_runs is not part of the CSV and stays 0.
  metrics::Bands b;
  std::map<double, std::size_t> prob_index;
  for (auto line : data_lines(text, kBandsHeader)) {
    const auto f = split_fields(line);
    if (f.size() != 3) throw InvalidArgument("bands CSV rows need 3 fields");
    const auto step = parse_int<std::int64_t>(f[0]);
    const double prob = parse_double(f[1]);
    const double value = parse_double(f[2]);
    if (b.steps.empty() || b.steps.back() != step) b.steps.push_back(step);
    auto [it, inserted] = prob_index.try_emplace(prob, b.probs.size());
    if (inserted) {
      if (b.steps.size() != 1) throw InvalidArgument("bands CSV lists a new probability after the first step");
      b.probs.push_back(prob);
      b.values.emplace_back();
    }
    auto& column = b.values[it->second];
    if (column.size() + 1 != b.steps.size()) throw InvalidArgument("bands CSV rows are not step-major");
    column.push_back(value);
  }
  for (const auto& column : b.values) {
    if (column.size() != b.steps.size()) throw InvalidArgument("bands CSV is incomplete");
  }
  return b;
}

Histogram histogram(const std::vector<double>& samples, std::size_t bins, double upper) {
  if (bins == 0) throw InvalidArgument("histogram needs at least one bin");
  if (!(upper > 0.0) || !std::isfinite(upper)) throw InvalidArgument("histogram upper edge must be positive");
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = upper * static_cast<double>(i) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  for (double v : samples) {
    if (!(v >= 0.0)) throw InvalidArgument("histogram samples must be nonnegative");
    if (v >= upper) {
      ++h.overflow;
      continue;
    }
    auto bin = static_cast<std::size_t>(v / upper * static_cast<double>(bins));
    // Keep the bin consistent with the printed edges.
    while (bin > 0 && v < h.edges[bin]) --bin;
    while (bin + 1 < bins && v >= h.edges[bin + 1]) ++bin;
    ++h.counts[bin];
  }
  return h;
}

std::string histogram_csv(const Histogram& hist) {
  std::string out = "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    out += format_double(hist.edges[i]) + "," + format_double(hist.edges[i + 1]) + "," +
           std::to_string(hist.counts[i]) + "\n";
  }
  out += format_double(hist.edges.back()) + ",inf," + std::to_string(hist.overflow) + "\n";
  return out;
}

std::string bands_svg(const std::vector<std::pair<std::string, metrics::Bands>>& series, const std::string& title,
                      const std::string& y_label) {
  constexpr double W = 720, H = 440, L = 70, R = 160, T = 40, B = 50;
  static constexpr std::array<const char*, 8> colors = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                        "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  double xmax = 1.0;
  double ymin = std::numeric_limits<double>::infinity();
  double ymax = 0.0;
  for (const auto& [name, b] : series) {
    if (!b.steps.empty()) xmax = std::max(xmax, static_cast<double>(b.steps.back()));
    for (const auto& column : b.values) {
      for (double v : column) {
        if (v > 0.0 && std::isfinite(v)) {
          ymin = std::min(ymin, v);
          ymax = std::max(ymax, v);
        }
      }
    }
  }
  if (!(ymax > 0.0)) {
    ymin = 1e-3;
    ymax = 1.0;
  }
  double lo = std::floor(std::log10(ymin));
  double hi = std::ceil(std::log10(ymax));
  if (hi <= lo) hi = lo + 1.0;
  const double floor_value = std::pow(10.0, lo);
  auto px = [&](double step) { return L + (W - L - R) * step / xmax; };
  auto py = [&](double v) {
    if (!(v > 0.0)) v = floor_value;
    if (!std::isfinite(v)) v = std::pow(10.0, hi);
    const double u = (std::log10(std::clamp(v, floor_value, std::pow(10.0, hi))) - lo) / (hi - lo);
    return T + (H - T - B) * (1.0 - u);
  };
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(title)
    << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (double e = lo; e <= hi; e += 1.0) {
    const double y = py(std::pow(10.0, e));
    s << "<text x=\"" << L - 6 << "\" y=\"" << fmt(y + 4) << "\" text-anchor=\"end\" font-size=\"11\">1e"
      << static_cast<int>(e) << "</text>\n";
  }
  s << "<text x=\"" << L << "\" y=\"" << H - B + 18 << "\" font-size=\"11\">0</text>\n";
  s << "<text x=\"" << W - R << "\" y=\"" << H - B + 18 << "\" text-anchor=\"end\" font-size=\"11\">"
    << static_cast<long long>(xmax) << "</text>\n";
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">step</text>\n";
  s << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 "
    << (T + H - B) / 2 << ")\" text-anchor=\"middle\">" << escape_xml(y_label) << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& [name, b] = series[i];
    const char* color = colors[i % colors.size()];
    if (b.steps.empty() || b.probs.empty()) continue;
    const auto lo_it = std::min_element(b.probs.begin(), b.probs.end());
    const auto hi_it = std::max_element(b.probs.begin(), b.probs.end());
    std::size_t mid = 0;
    double best = 2.0;
    for (std::size_t k = 0; k < b.probs.size(); ++k) {
      if (std::abs(b.probs[k] - 0.5) < best) {
        best = std::abs(b.probs[k] - 0.5);
        mid = k;
      }
    }
    const auto& lower = b.values[static_cast<std::size_t>(lo_it - b.probs.begin())];
    const auto& upper = b.values[static_cast<std::size_t>(hi_it - b.probs.begin())];
    s << "<polygon fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
    for (std::size_t t = 0; t < b.steps.size(); ++t) {
      s << fmt(px(static_cast<double>(b.steps[t]))) << ',' << fmt(py(upper[t])) << ' ';
    }
    for (std::size_t t = b.steps.size(); t-- > 0;) {
      s << fmt(px(static_cast<double>(b.steps[t]))) << ',' << fmt(py(lower[t])) << ' ';
    }
    s << "\"/>\n";
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t t = 0; t < b.steps.size(); ++t) {
      s << fmt(px(static_cast<double>(b.steps[t]))) << ',' << fmt(py(b.values[mid][t])) << ' ';
    }
    s << "\"/>\n";
    const double ly = T + 16.0 * static_cast<double>(i) + 8.0;
    s << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 32 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << W - R + 38 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << escape_xml(name)
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

nlohmann::json to_json(const metrics::TailReport& r) {
  return {{"Q1", number(r.quartiles.q1)},     {"Q2", number(r.quartiles.q2)},
          {"Q3", number(r.quartiles.q3)},     {"p_mR", number(r.p_mild)},
          {"p_eR", number(r.p_extreme)},      {"rho_mR", number(r.rho_mild)},
          {"rho_eR", number(r.rho_extreme)}};
}

nlohmann::json to_json(const metrics::FailureEstimate& e) {
  return {{"failures", e.failures},
          {"total", e.total},
          {"probability", number(e.probability)},
          {"ci95", {number(e.ci_lower), number(e.ci_upper)}}};
}

nlohmann::json to_json(const theory::TheoryParams& p) {
  nlohmann::json terms = nlohmann::json::array();
  for (double t : p.gamma_terms) terms.push_back(number(t));
  return {{"gamma", number(p.gamma)},
          {"lambda", number(p.lambda)},
          {"eta", number(p.eta)},
          {"log_factor", number(p.log_factor)},
          {"gamma_terms", terms},
          {"binding_term", p.binding_term},
          {"inputs",
           {{"K", p.inputs.steps},
            {"delta", number(p.inputs.delta)},
            {"L", number(p.inputs.smoothness)},
            {"sigma", number(p.inputs.sigma)},
            {"alpha", number(p.inputs.alpha)},
            {"b0", number(p.inputs.b0)},
            {"scale", number(p.inputs.scale)}}}};
}

nlohmann::json to_json(const FailureConstructionReport& r) {
  nlohmann::json kicked = nlohmann::json::array();
  for (const auto& b : r.kicked) kicked.push_back(branch_json(b));
  return {{"kind", r.params.kind == ConstructionKind::adagrad ? "adagrad" : "adagradd"},
          {"params",
           {{"x0", number(r.params.x0)},
            {"gamma", number(r.params.gamma)},
            {"nu", number(r.params.nu)},
            {"sigma", number(r.params.sigma)},
            {"b_init", number(r.params.b_init)},
            {"K", r.params.steps},
            {"replays", r.params.replays},
            {"base_seed", r.params.base_seed}}},
          {"epsilon", number(r.epsilon)},
          {"amplitude", number(r.amplitude)},
          {"activation_prob", number(r.activation_prob)},
          {"oracle_active", r.oracle_active},
          {"lower_bound_K", number(r.lower_bound_K)},
          {"lower_bound_feasible", r.lower_bound_feasible},
          {"reference_threshold", number(r.reference_threshold)},
          {"unkicked", branch_json(r.unkicked)},
          {"kicked", kicked},
          {"consequence_holds", r.consequence_holds},
          {"consistent", r.consistent},
          {"activations", r.activations},
          {"failures", r.failures},
          {"activation_freq", number(r.activation_freq)},
          {"failure_freq", number(r.failure_freq)},
          {"expected_failure_prob", number(r.expected_failure_prob)},
          {"ci99_half_width", number(r.ci99_half_width)},
          {"activation_matches", r.activation_matches},
          {"failure_matches", r.failure_matches},
          {"passed", r.passed}};
}

nlohmann::json to_json(const ConvexTheoremReport& r) {
  double worst = 0.0;
  for (double s : r.weighted_sums) worst = std::max(worst, s);
  return {{"K", r.params.steps},
          {"delta", number(r.params.delta)},
          {"seeds", r.params.n_seeds},
          {"base_seed", r.params.base_seed},
          {"x0", number(r.params.x0)},
          {"b0", number(r.params.b0)},
          {"alpha", number(r.params.alpha)},
          {"radius", number(r.radius)},
          {"sigma", number(r.sigma)},
          {"theory", to_json(r.theory)},
          {"bound", number(r.bound)},
          {"max_weighted_sum", number(worst)},
          {"passes", r.passes},
          {"pass_fraction", number(r.pass_fraction)},
          {"required_fraction", number(r.required_fraction)},
          {"passed", r.passed}};
}

nlohmann::json summary_json(const ExperimentConfig& config, const TrajectoryEnsemble& ensemble,
                            const metrics::Bands& bands, const metrics::FailureEstimate& failure) {
  nlohmann::json finals = nlohmann::json::object();
  for (std::size_t k = 0; k < bands.probs.size(); ++k) {
    finals[format_double(bands.probs[k])] = number(bands.values[k].empty() ? 0.0 : bands.values[k].back());
  }
  return {{"label", config.label},
          {"config_hash", hex64(ensemble.config_hash)},
          {"steps", config.steps},
          {"seeds", config.n_seeds},
          {"base_seed", config.base_seed},
          {"metric", to_string(config.metric)},
          {"failed_runs", ensemble.failures()},
          {"padded_runs", bands.padded_runs},
          {"final_percentiles", finals},
          {"failure", to_json(failure)},
          {"failure_epsilon", number(config.failure_epsilon)}};
}

}  // namespace clipada::io
