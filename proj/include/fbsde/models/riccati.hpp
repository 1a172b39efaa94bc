#pragma once

#include <cstddef>
#include <vector>

#include "fbsde/core/types.hpp"

namespace fbsde {

/// P, Q, R on a uniform grid of [0, T], solved backward from (A, v, c).
struct RiccatiTable {
  double horizon = 0.0;
  std::size_t steps = 0;
  std::vector<Matrix> P;
  std::vector<Vector> Q;
  std::vector<double> R;

  /// Linear interpolation between nodes.
  void at(double t, Matrix& p, Vector& q, double& r) const;
};

/// RK4 integration of Ṗ = (P+Pᵀ)², Q̇ = 2(P+Pᵀ)Q, Ṙ = |Q|² − Tr(P+Pᵀ).
RiccatiTable solve_riccati(const Matrix& A, const Vector& v, double c, double horizon,
                           std::size_t steps);

}  // namespace fbsde
