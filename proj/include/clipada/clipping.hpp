// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace clipada {

enum class ClipMode { global, coordinate, layer };

std::string to_string(ClipMode mode);

/// Half-open coordinate range [begin, end).
struct LayerRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const LayerRange&, const LayerRange&) = default;
};

struct ClipSpec {
  ClipMode mode = ClipMode::global;
  double level = 1.0;
  std::vector<LayerRange> layers;  // required iff mode == layer

  // Throws InvalidArgument unless level > 0 and, in layer mode, the layers
  // partition [0, dim).
  void validate(std::size_t dim) const;
};

// min{1, lambda / |g|} g, and 0 for g = 0. The computed norm of the result
// never exceeds lambda, so clip_global is idempotent in floating point.
std::vector<double> clip_global(std::span<const double> g, double level);
// Each component clamped to [-lambda, lambda].
std::vector<double> clip_coordinate(std::span<const double> g, double level);
// clip_global applied independently to each slice of `layers`.
std::vector<double> clip_layer(std::span<const double> g, std::span<const LayerRange> layers,
                               double level);

std::vector<double> apply_clip(std::span<const double> g, const ClipSpec& spec);

// In-place forms used by the step engines.
void clip_global_inplace(std::span<double> g, double level);
void apply_clip_inplace(std::span<double> g, const ClipSpec& spec);

}  // namespace clipada
