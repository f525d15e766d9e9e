#pragma once

#include <cstdint>
#include <random>

namespace cohsync::detail {

// Uniform real in [-1, 1] built from the top 53 bits of the standardized
// mt19937_64 sequence, so the value is identical on every platform.
inline double uniform_symmetric(std::mt19937_64& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

}  // namespace cohsync::detail
