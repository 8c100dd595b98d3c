#pragma once

#include <cstdint>

namespace fastgrant {

/// Simulation time in integer milliseconds since the start of a run.
using Millis = std::int64_t;

using MtdId = std::uint32_t;

struct Position {
  double x = 0.0;
  double y = 0.0;
};

}  // namespace fastgrant
