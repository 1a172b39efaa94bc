#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fbsde/core/time_grid.hpp"
#include "fbsde/core/types.hpp"

namespace fbsde {

/// Brownian increments ΔW_n(b) ∈ R^d, stored as [n][b][j].
///
/// Each increment is a pure function of (seed, n, b, j), so any sub-batch or
/// prefix of steps reproduces the same numbers.
class BrownianBatch {
 public:
  BrownianBatch(TimeGrid grid, std::size_t dim, std::size_t batch, std::uint64_t seed,
                std::size_t steps);

  const TimeGrid& grid() const { return grid_; }
  std::size_t dim() const { return dim_; }
  std::size_t batch() const { return batch_; }
  std::size_t steps() const { return steps_; }
  std::uint64_t seed() const { return seed_; }

  double operator()(std::size_t n, std::size_t b, std::size_t j) const {
    return data_[(n * batch_ + b) * dim_ + j];
  }
  Eigen::Map<const Vector> increment(std::size_t n, std::size_t b) const {
    return Eigen::Map<const Vector>(data_.data() + (n * batch_ + b) * dim_, dim_);
  }
  /// All increments of step n as a B×d row-major block.
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  step(std::size_t n) const {
    return {data_.data() + n * batch_ * dim_, static_cast<Eigen::Index>(batch_),
            static_cast<Eigen::Index>(dim_)};
  }
  const std::vector<double>& data() const { return data_; }

 private:
  TimeGrid grid_;
  std::size_t dim_;
  std::size_t batch_;
  std::size_t steps_;
  std::uint64_t seed_;
  std::vector<double> data_;
};

BrownianBatch sample_brownian(const TimeGrid& grid, std::size_t dim, std::size_t batch,
                              std::uint64_t seed);

/// Increments for the first `steps` intervals only.
BrownianBatch sample_brownian(const TimeGrid& grid, std::size_t dim, std::size_t batch,
                              std::uint64_t seed, std::size_t steps);

}  // namespace fbsde
