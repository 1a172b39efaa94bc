#include "fbsde/core/brownian.hpp"

#include <cmath>

#include "fbsde/core/errors.hpp"
#include "fbsde/core/philox.hpp"

namespace fbsde {

BrownianBatch::BrownianBatch(TimeGrid grid, std::size_t dim, std::size_t batch,
                             std::uint64_t seed, std::size_t steps)
    : grid_(std::move(grid)), dim_(dim), batch_(batch), steps_(steps), seed_(seed) {
  if (dim == 0 || batch == 0 || steps == 0)
    throw InvalidArgument("Brownian batch needs positive dimension, batch size and steps");
  if (steps > grid_.steps()) throw InvalidArgument("Brownian batch exceeds the time grid");
  data_.resize(steps * batch * dim);
  const PhiloxKey key = philox_key(seed);
  for (std::size_t n = 0; n < steps; ++n) {
    const double scale = std::sqrt(grid_.dt(n));
    for (std::size_t b = 0; b < batch; ++b) {
      double* out = data_.data() + (n * batch + b) * dim;
      for (std::size_t j = 0; j < dim; j += 2) {
        const auto z = gaussian_pair({static_cast<std::uint32_t>(n),
                                      static_cast<std::uint32_t>(b),
                                      static_cast<std::uint32_t>(j / 2),
                                      static_cast<std::uint32_t>(b >> 32)},
                                     key);
        out[j] = scale * z[0];
        if (j + 1 < dim) out[j + 1] = scale * z[1];
      }
    }
  }
}

BrownianBatch sample_brownian(const TimeGrid& grid, std::size_t dim, std::size_t batch,
                              std::uint64_t seed) {
  return BrownianBatch(grid, dim, batch, seed, grid.steps());
}

BrownianBatch sample_brownian(const TimeGrid& grid, std::size_t dim, std::size_t batch,
                              std::uint64_t seed, std::size_t steps) {
  return BrownianBatch(grid, dim, batch, seed, steps);
}

}  // namespace fbsde
