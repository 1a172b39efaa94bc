#include "fbsde/core/time_grid.hpp"

#include <cmath>

#include "fbsde/core/errors.hpp"

namespace fbsde {

TimeGrid::TimeGrid(double horizon, std::size_t steps)
    : horizon_(horizon), steps_(steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw InvalidArgument("time grid horizon must be positive");
  if (steps == 0) throw InvalidArgument("time grid needs at least one interval");
  dt_ = horizon / static_cast<double>(steps);
  nodes_.resize(steps + 1);
  for (std::size_t n = 0; n < steps; ++n)
    nodes_[n] = horizon * static_cast<double>(n) / static_cast<double>(steps);
  nodes_[steps] = horizon;
}

TimeGrid make_grid(double horizon, std::size_t steps) { return TimeGrid(horizon, steps); }

}  // namespace fbsde
