#pragma once

#include <string>
#include <vector>

#include "fbsde/core/types.hpp"

namespace fbsde {

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  /// Zero moments shaped like `params`.
  explicit AdamState(const std::vector<Matrix>& params);
};

/// One bias-corrected Adam update of `params` in place.
///
/// Returns false and leaves everything untouched when a gradient entry is not
/// finite; `diagnostic` then names the offending block.
bool adam_step(AdamState& state, const std::vector<Matrix*>& params,
               const std::vector<Matrix>& grads, double lr, std::string* diagnostic = nullptr);
bool adam_step(AdamState& state, std::vector<Matrix>& params, const std::vector<Matrix>& grads,
               double lr, std::string* diagnostic = nullptr);

/// Piecewise-constant learning rate: `base` decayed by `factor` at each
/// fraction of the iteration budget listed in `milestones`.
struct LearningRateSchedule {
  double base = 1e-3;
  double factor = 0.1;
  std::vector<double> milestones{0.4, 0.8};

  double at(std::size_t iter, std::size_t budget) const;
  static LearningRateSchedule constant(double lr) { return {lr, 1.0, {}}; }
};

}  // namespace fbsde
