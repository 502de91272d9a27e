// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace clipada {

// Seeded 64-bit Mersenne Twister. The engine's output sequence is fixed by
// the standard, and the uniform mapping below is ours, so draws are
// reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1): midpoints of the 2^53 grid.
  double uniform_open() {
    constexpr double kScale = 0x1.0p-53;
    return (static_cast<double>(engine_() >> 11) + 0.5) * kScale;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace clipada
