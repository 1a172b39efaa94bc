#include "fbsde/bench/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "fbsde/core/brownian.hpp"
#include "fbsde/core/errors.hpp"
#include "fbsde/core/philox.hpp"
#include "fbsde/sde/sde_sim.hpp"

namespace fbsde {

double relative_error(double a, double b) {
  const double e = std::abs(a - b);
  return b == 0.0 ? e : e / std::abs(b);
}

double relative_error(const Matrix& a, const Matrix& b) {
  const double e = (a - b).norm();
  const double r = b.norm();
  return r == 0.0 ? e : e / r;
}

SolutionView view(const BcosSolution& sol) {
  SolutionView v;
  v.solver = "bcos";
  v.steps = sol.grid.steps();
  const auto* stages = &sol.stages;
  const auto eval = [stages](std::size_t n, const Matrix& X, int which) {
    if (X.cols() != 1) throw InvalidArgument("the cosine solver is one-dimensional");
    Matrix out(X.rows(), 1);
    for (Eigen::Index b = 0; b < X.rows(); ++b) {
      const BcosStage::Value r = (*stages)[n](X(b, 0));
      out(b, 0) = which == 0 ? r.y : which == 1 ? r.z : r.gamma;
    }
    return out;
  };
  v.y = [eval](std::size_t n, const Matrix& X) { return Vector(eval(n, X, 0).col(0)); };
  v.z = [eval](std::size_t n, const Matrix& X) { return eval(n, X, 1); };
  v.gamma = [eval](std::size_t n, const Matrix& X) { return eval(n, X, 2); };
  return v;
}

SolutionView view(const DeepSolution& sol) {
  SolutionView v;
  v.solver = to_string(sol.config.variant);
  v.steps = sol.grid.steps();
  const auto* stages = &sol.stages;
  v.y = [stages](std::size_t n, const Matrix& X) { return (*stages)[n].y(X); };
  v.z = [stages](std::size_t n, const Matrix& X) { return (*stages)[n].z(X); };
  v.gamma = [stages](std::size_t n, const Matrix& X) { return (*stages)[n].gamma(X); };
  return v;
}

SolutionView reference_view(ModelPtr model, const TimeGrid& grid) {
  if (!model->has_reference())
    throw UnsupportedOperation("model " + model->name() + " has no reference solution");
  std::vector<StageTriple> stages;
  for (std::size_t n = 0; n <= grid.steps(); ++n)
    stages.push_back(StageTriple::reference(model, n, grid.time(n)));
  SolutionView v;
  v.solver = "reference";
  v.steps = grid.steps();
  auto shared = std::make_shared<std::vector<StageTriple>>(std::move(stages));
  v.y = [shared](std::size_t n, const Matrix& X) { return (*shared)[n].y(X); };
  v.z = [shared](std::size_t n, const Matrix& X) { return (*shared)[n].z(X); };
  v.gamma = [shared](std::size_t n, const Matrix& X) { return (*shared)[n].gamma(X); };
  return v;
}

ErrorReport evaluate_errors(const SolutionView& sol, ModelPtr model, const TimeGrid& grid,
                            std::size_t M, std::uint64_t seed) {
  if (!model->has_reference())
    throw UnsupportedOperation("model " + model->name() + " has no reference solution");
  if (M < 1) throw InvalidArgument("test batch size must be positive");
  if (sol.steps != grid.steps()) throw InvalidArgument("solution and grid disagree on N");
  const std::size_t N = grid.steps(), d = model->dim();
  const auto D = static_cast<Eigen::Index>(d);
  const SolutionView ref = reference_view(model, grid);
  const PathEnsemble paths =
      euler_maruyama(*model, sample_brownian(grid, d, M, derive_seed(seed, seed_domain::test)));

  ErrorReport r;
  r.solver = sol.solver;
  r.seed = seed;
  const double inv_m = 1.0 / static_cast<double>(M);
  for (std::size_t n = 0; n <= N; ++n) {
    const Matrix& X = paths.X[n];
    const double t = grid.time(n);
    const Matrix dg = sol.gamma(n, X) - ref.gamma(n, X);
    double weighted = 0.0;
    for (Eigen::Index b = 0; b < X.rows(); ++b) {
      Matrix g(D, D);
      for (Eigen::Index i = 0; i < D; ++i) g.row(i) = dg.block(b, i * D, 1, D);
      weighted += (g * model->diffusion(t, X.row(b).transpose())).squaredNorm();
    }
    r.t.push_back(t);
    r.mse_y.push_back((sol.y(n, X) - ref.y(n, X)).squaredNorm() * inv_m);
    r.mse_z.push_back((sol.z(n, X) - ref.z(n, X)).squaredNorm() * inv_m);
    r.mse_gamma.push_back(dg.squaredNorm() * inv_m);
    r.mse_gamma_sigma.push_back(weighted * inv_m);
  }
  r.max_mse_y = *std::max_element(r.mse_y.begin(), r.mse_y.end());
  r.max_mse_z = *std::max_element(r.mse_z.begin(), r.mse_z.end());
  for (std::size_t n = 0; n < N; ++n) {
    r.gamma_sum_dt += grid.dt(n) * r.mse_gamma[n];
    r.gamma_sigma_weighted += grid.dt(n) * r.mse_gamma_sigma[n];
  }
  const Matrix x0 = model->x0().transpose();
  r.rel_y0 = relative_error(sol.y(0, x0)(0), ref.y(0, x0)(0));
  r.rel_z0 = relative_error(sol.z(0, x0), ref.z(0, x0));
  r.rel_g0 = relative_error(sol.gamma(0, x0), ref.gamma(0, x0));
  return r;
}

ErrorReport evaluate_errors(const BcosSolution& sol, ModelPtr model, const TimeGrid& grid,
                            std::size_t M, std::uint64_t seed) {
  return evaluate_errors(view(sol), std::move(model), grid, M, seed);
}

ErrorReport evaluate_errors(const DeepSolution& sol, ModelPtr model, const TimeGrid& grid,
                            std::size_t M, std::uint64_t seed) {
  return evaluate_errors(view(sol), std::move(model), grid, M, seed);
}

}  // namespace fbsde
