#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "fbsde/bcos/bcos_solver.hpp"
#include "fbsde/core/time_grid.hpp"
#include "fbsde/deep/deep_solver.hpp"
#include "fbsde/models/fbsde_model.hpp"

namespace fbsde {

/// Stage evaluators of a solution on a B×d batch: y → B, z → B×d, γ → B×(d·d) row-major.
struct SolutionView {
  std::string solver;
  std::size_t steps = 0;
  std::function<Vector(std::size_t n, const Matrix& X)> y;
  std::function<Matrix(std::size_t n, const Matrix& X)> z;
  std::function<Matrix(std::size_t n, const Matrix& X)> gamma;
};

SolutionView view(const BcosSolution& sol);
SolutionView view(const DeepSolution& sol);
/// The model's exact solution sampled at the grid nodes.
SolutionView reference_view(ModelPtr model, const TimeGrid& grid);

struct ErrorReport {
  std::string solver;
  std::uint64_t seed = 0;
  std::vector<double> t;
  std::vector<double> mse_y, mse_z, mse_gamma;
  /// Mean |(γ̂ − γ)σ|² per node.
  std::vector<double> mse_gamma_sigma;
  double max_mse_y = 0.0;
  double max_mse_z = 0.0;
  /// Σ_{n<N} Δt·MSE_Γ(n).
  double gamma_sum_dt = 0.0;
  /// Σ_{n<N} Δt·mean|(γ̂_n − γ_n)σ|².
  double gamma_sigma_weighted = 0.0;
  double rel_y0 = 0.0, rel_z0 = 0.0, rel_g0 = 0.0;
  double runtime_s = std::numeric_limits<double>::quiet_NaN();
};

/// Errors against the reference along M Euler paths drawn from the test seed domain.
ErrorReport evaluate_errors(const SolutionView& sol, ModelPtr model, const TimeGrid& grid,
                            std::size_t M, std::uint64_t seed);
ErrorReport evaluate_errors(const BcosSolution& sol, ModelPtr model, const TimeGrid& grid,
                            std::size_t M, std::uint64_t seed);
ErrorReport evaluate_errors(const DeepSolution& sol, ModelPtr model, const TimeGrid& grid,
                            std::size_t M, std::uint64_t seed);

/// |a − b| / |b|, or |a − b| when b = 0.
double relative_error(double a, double b);
double relative_error(const Matrix& a, const Matrix& b);

}  // namespace fbsde
