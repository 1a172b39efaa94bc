#include "fbsde/sde/sde_sim.hpp"

#include <string>

#include "fbsde/core/errors.hpp"

namespace fbsde {

namespace {

PathEnsemble allocate(const FbsdeModel& model, const BrownianBatch& dW) {
  if (dW.dim() != model.dim())
    throw InvalidArgument("Brownian dimension does not match the model");
  PathEnsemble p{dW, model.dim(), dW.batch(), dW.steps(), {}, {}};
  p.X.assign(p.steps + 1, Matrix(p.batch, p.dim));
  p.DX.assign(p.steps, Matrix(p.batch, p.dim * p.dim));
  p.X[0] = model.x0().transpose().replicate(static_cast<Eigen::Index>(p.batch), 1);
  return p;
}

void store(Matrix& block, std::size_t b, const Matrix& m) {
  const auto d = m.rows();
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index l = 0; l < d; ++l) block(static_cast<Eigen::Index>(b), i * d + l) = m(i, l);
}

void check(const Vector& x, const Matrix& m, std::size_t n, std::size_t b) {
  if (!x.allFinite() || !m.allFinite())
    throw SimulationFailure("non-finite forward state at step " + std::to_string(n) + ", path " +
                                std::to_string(b),
                            n, b);
}

}  // namespace

Matrix PathEnsemble::malliavin(std::size_t n, std::size_t b) const {
  Matrix m(dim, dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t l = 0; l < dim; ++l)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) =
          DX[n](static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i * dim + l));
  return m;
}

Matrix one_step_malliavin(const FbsdeModel& model, double t, const Vector& x, double dt,
                          const Vector& dw) {
  const Matrix sigma = model.diffusion(t, x);
  if (model.constant_coefficients()) return sigma;
  const Tensor3 ds = model.diffusion_jacobian(t, x);
  Matrix V(model.dim(), model.dim());
  for (std::size_t k = 0; k < model.dim(); ++k) V.col(static_cast<Eigen::Index>(k)) = ds[k] * dw;
  return sigma + dt * model.drift_jacobian(t, x) * sigma + V * sigma;
}

PathEnsemble euler_maruyama(const FbsdeModel& model, const BrownianBatch& dW) {
  PathEnsemble p = allocate(model, dW);
  const TimeGrid& grid = dW.grid();
  for (std::size_t n = 0; n < p.steps; ++n) {
    const double t = grid.time(n);
    const double dt = grid.dt(n);
    for (std::size_t b = 0; b < p.batch; ++b) {
      const Vector x = p.state(n, b);
      const Vector dw = dW.increment(n, b);
      const Vector next = x + model.drift(t, x) * dt + model.diffusion(t, x) * dw;
      const Matrix dx = one_step_malliavin(model, t, x, dt, dw);
      check(next, dx, n, b);
      p.X[n + 1].row(static_cast<Eigen::Index>(b)) = next.transpose();
      store(p.DX[n], b, dx);
    }
  }
  return p;
}

PathEnsemble exact_paths(const FbsdeModel& model, const BrownianBatch& dW) {
  if (!model.has_exact_paths()) throw UnsupportedOperation(model.name() + " has no exact paths");
  PathEnsemble p = allocate(model, dW);
  const TimeGrid& grid = dW.grid();
  Matrix W = Matrix::Zero(p.batch, p.dim);
  for (std::size_t n = 0; n < p.steps; ++n) {
    W += dW.step(n);
    const double t = grid.time(n + 1);
    for (std::size_t b = 0; b < p.batch; ++b) {
      const Vector w = W.row(static_cast<Eigen::Index>(b)).transpose();
      const Vector x = model.exact_state(t, w);
      const Matrix dx = model.exact_malliavin(t, w);
      check(x, dx, n, b);
      p.X[n + 1].row(static_cast<Eigen::Index>(b)) = x.transpose();
      store(p.DX[n], b, dx);
    }
  }
  return p;
}

}  // namespace fbsde
