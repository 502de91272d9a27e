// SPDX-License-Identifier: Apache-2.0

#include "clipada/clipping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "clipada/errors.hpp"

namespace clipada {

namespace {

void check_inputs(std::span<const double> g, double level) {
  if (!(level > 0.0) || !std::isfinite(level)) throw InvalidArgument("clipping level must be positive");
  for (double v : g) {
    if (!std::isfinite(v)) throw InvalidArgument("cannot clip a non-finite vector");
  }
}

double norm(std::span<const double> g) {
  double s = 0.0;
  for (double v : g) s += v * v;
  return std::sqrt(s);
}

void clip_global_unchecked(std::span<double> g, double level) {
  const double n = norm(g);
  if (n <= level) return;
  if (g.size() == 1) {
    // Exact projection; level / |v| * v can miss the level by an ulp.
    g[0] = std::copysign(level, g[0]);
    return;
  }
  double scale = level / n;
  const std::vector<double> original(g.begin(), g.end());
  for (;;) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * original[i];
    if (norm(g) <= level) return;
    // Rounding pushed the norm past the level; shrink by one ulp and retry.
    scale = std::nextafter(scale, 0.0);
  }
}

}  // namespace

std::string to_string(ClipMode mode) {
  switch (mode) {
    case ClipMode::global:
      return "global";
    case ClipMode::coordinate:
      return "coordinate";
    case ClipMode::layer:
      return "layer";
  }
  return "unknown";
}

void ClipSpec::validate(std::size_t dim) const {
  if (!(level > 0.0) || !std::isfinite(level)) throw InvalidArgument("clipping level must be positive");
  if (mode != ClipMode::layer) {
    if (!layers.empty()) throw InvalidArgument("layer layout given for a non-layer clipping mode");
    return;
  }
  if (layers.empty()) throw InvalidArgument("layer clipping requires a layout");
  std::vector<LayerRange> sorted = layers;
  std::sort(sorted.begin(), sorted.end(), [](const LayerRange& a, const LayerRange& b) { return a.begin < b.begin; });
  std::size_t cursor = 0;
  for (const auto& r : sorted) {
    if (r.begin >= r.end) throw InvalidArgument("empty or reversed layer range");
    if (r.begin < cursor) throw InvalidArgument("overlapping layer ranges");
    if (r.begin > cursor) throw InvalidArgument("layer layout leaves coordinates uncovered");
    cursor = r.end;
  }
  if (cursor != dim) throw InvalidArgument("layer layout does not cover every coordinate");
}

std::vector<double> clip_global(std::span<const double> g, double level) {
  check_inputs(g, level);
  std::vector<double> out(g.begin(), g.end());
  clip_global_unchecked(out, level);
  return out;
}

std::vector<double> clip_coordinate(std::span<const double> g, double level) {
  check_inputs(g, level);
  std::vector<double> out(g.size());
  std::transform(g.begin(), g.end(), out.begin(), [level](double v) { return std::clamp(v, -level, level); });
  return out;
}

std::vector<double> clip_layer(std::span<const double> g, std::span<const LayerRange> layers, double level) {
  ClipSpec spec{ClipMode::layer, level, {layers.begin(), layers.end()}};
  return apply_clip(g, spec);
}

std::vector<double> apply_clip(std::span<const double> g, const ClipSpec& spec) {
  std::vector<double> out(g.begin(), g.end());
  apply_clip_inplace(out, spec);
  return out;
}

void clip_global_inplace(std::span<double> g, double level) {
  check_inputs(g, level);
  clip_global_unchecked(g, level);
}

void apply_clip_inplace(std::span<double> g, const ClipSpec& spec) {
  check_inputs(g, spec.level);
  switch (spec.mode) {
    case ClipMode::global:
      clip_global_unchecked(g, spec.level);
      return;
    case ClipMode::coordinate:
      for (double& v : g) v = std::clamp(v, -spec.level, spec.level);
      return;
    case ClipMode::layer:
      spec.validate(g.size());
      for (const auto& r : spec.layers) clip_global_unchecked(g.subspan(r.begin, r.end - r.begin), spec.level);
      return;
  }
}

}  // namespace clipada
