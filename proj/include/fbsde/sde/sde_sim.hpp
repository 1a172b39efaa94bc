#pragma once

#include <cstddef>
#include <vector>

#include "fbsde/core/brownian.hpp"
#include "fbsde/models/fbsde_model.hpp"

namespace fbsde {

/// Forward paths X_n(b) and one-step Malliavin derivatives D_nX_{n+1}(b).
struct PathEnsemble {
  BrownianBatch noise;
  std::size_t dim = 0;
  std::size_t batch = 0;
  std::size_t steps = 0;
  /// steps + 1 blocks of shape B×d.
  std::vector<Matrix> X;
  /// steps blocks of shape B×(d·d); row b is D_nX_{n+1}(b) flattened row-major.
  std::vector<Matrix> DX;

  Vector state(std::size_t n, std::size_t b) const { return X[n].row(b).transpose(); }
  Matrix malliavin(std::size_t n, std::size_t b) const;
};

/// Euler–Maruyama for X together with
/// D_nX_{n+1} = σ + ∇μ σ Δt + Σ_k (∂_kσ ΔW) σ_k·, all at (t_n, X_n).
PathEnsemble euler_maruyama(const FbsdeModel& model, const BrownianBatch& dW);

/// Exact X at the nodes and exact D_{t_n}X_{t_{n+1}} from cumulative Brownian sums.
PathEnsemble exact_paths(const FbsdeModel& model, const BrownianBatch& dW);

/// One-step Malliavin factor D_nX_{n+1} at a single state.
Matrix one_step_malliavin(const FbsdeModel& model, double t, const Vector& x, double dt,
                          const Vector& dw);

}  // namespace fbsde
