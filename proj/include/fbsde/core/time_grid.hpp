#pragma once

#include <cstddef>
#include <vector>

namespace fbsde {

/// Uniform partition 0 = t_0 < ... < t_N = T.
class TimeGrid {
 public:
  TimeGrid(double horizon, std::size_t steps);

  double horizon() const { return horizon_; }
  std::size_t steps() const { return steps_; }
  double dt() const { return dt_; }
  double dt(std::size_t) const { return dt_; }
  double time(std::size_t n) const { return nodes_[n]; }
  const std::vector<double>& nodes() const { return nodes_; }

 private:
  double horizon_;
  std::size_t steps_;
  double dt_;
  std::vector<double> nodes_;
};

TimeGrid make_grid(double horizon, std::size_t steps);

}  // namespace fbsde
