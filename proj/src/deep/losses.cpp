#include "fbsde/deep/losses.hpp"

#include "fbsde/core/brownian.hpp"
#include "fbsde/core/errors.hpp"
#include "fbsde/sde/sde_sim.hpp"

namespace fbsde {

namespace {

Matrix unflatten(const Matrix& rows, Eigen::Index b, Eigen::Index d) {
  Matrix m(d, d);
  for (Eigen::Index i = 0; i < d; ++i) m.row(i) = rows.block(b, i * d, 1, d);
  return m;
}

void check_rows(const Matrix& m, Eigen::Index B, Eigen::Index cols, const char* what) {
  if (m.rows() != B || m.cols() != cols)
    throw InvalidArgument(std::string("shape mismatch: ") + what);
}

}  // namespace

StageBatch make_stage_batch(const FbsdeModel& model, const TimeGrid& grid, std::size_t n,
                            std::size_t batch, std::uint64_t seed) {
  if (n >= grid.steps()) throw InvalidArgument("stage index beyond the grid");
  const std::size_t d = model.dim();
  const BrownianBatch noise = sample_brownian(grid, d, batch, seed, n + 1);
  const auto B = static_cast<Eigen::Index>(batch);
  const double dt = grid.dt();
  Matrix X = model.x0().transpose().replicate(B, 1);
  StageBatch out;
  out.n = n;
  out.t = grid.time(n);
  out.t_next = grid.time(n + 1);
  out.dt = dt;
  out.DX.resize(B, static_cast<Eigen::Index>(d * d));
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = grid.time(k);
    const Matrix dW = noise.step(k);
    if (k == n) {
      out.X = X;
      out.dW = dW;
    }
    if (model.constant_coefficients()) {
      const Vector x = X.row(0).transpose();
      const Vector mu = model.drift(t, x);
      const Matrix sigma = model.diffusion(t, x);
      if (k == n) {
        const Matrix D = one_step_malliavin(model, t, x, dt, Vector::Zero(d));
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d); ++i)
          out.DX.middleCols(i * d, d) = D.row(i).replicate(B, 1);
      }
      X = X + (mu.transpose() * dt).replicate(B, 1) + dW * sigma.transpose();
    } else {
      for (Eigen::Index b = 0; b < B; ++b) {
        const Vector x = X.row(b).transpose();
        const Vector dw = dW.row(b).transpose();
        if (k == n) {
          const Matrix D = one_step_malliavin(model, t, x, dt, dw);
          for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d); ++i)
            out.DX.block(b, i * d, 1, d) = D.row(i);
        }
        X.row(b) = (x + model.drift(t, x) * dt + model.diffusion(t, x) * dw).transpose();
      }
    }
    for (Eigen::Index b = 0; b < B; ++b)
      if (!X.row(b).allFinite())
        throw SimulationFailure("non-finite state in stage batch", k + 1,
                                static_cast<std::size_t>(b));
  }
  out.X_next = std::move(X);
  return out;
}

Matrix dy_estimate(const Matrix& z_next, const FbsdeModel& model, double t_next,
                   const Matrix& X_next, const Matrix& DX) {
  const Eigen::Index B = X_next.rows(), d = X_next.cols();
  check_rows(z_next, B, d, "z_next");
  check_rows(DX, B, d * d, "DX");
  Matrix out(B, d);
  Matrix inv;
  if (model.constant_coefficients()) inv = model.diffusion_inv(t_next, X_next.row(0).transpose());
  for (Eigen::Index b = 0; b < B; ++b) {
    if (!model.constant_coefficients()) inv = model.diffusion_inv(t_next, X_next.row(b).transpose());
    if (!inv.allFinite())
      throw SimulationFailure("singular diffusion while forming D_nY", 0,
                              static_cast<std::size_t>(b));
    out.row(b) = z_next.row(b) * inv * unflatten(DX, b, d);
  }
  return out;
}

NextStageData next_stage_data(const FbsdeModel& model, const StageBatch& batch,
                              const StageTriple& next) {
  const Eigen::Index B = batch.X_next.rows(), d = batch.X_next.cols();
  NextStageData o;
  o.y = next.y(batch.X_next);
  o.z = next.z(batch.X_next);
  o.dy = dy_estimate(o.z, model, batch.t_next, batch.X_next, batch.DX);
  o.f.resize(B);
  o.f_y.resize(B);
  o.f_x.resize(B, d);
  o.f_z.resize(B, d);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Vector x = batch.X_next.row(b).transpose();
    const RowVector z = o.z.row(b);
    o.f(b) = model.driver(batch.t_next, x, o.y(b), z);
    o.f_y(b) = model.driver_dy(batch.t_next, x, o.y(b), z);
    o.f_x.row(b) = model.driver_dx(batch.t_next, x, o.y(b), z);
    o.f_z.row(b) = model.driver_dz(batch.t_next, x, o.y(b), z);
  }
  return o;
}

SigmaRows SigmaRows::at(const FbsdeModel& model, double t, const Matrix& X) {
  SigmaRows s;
  const Eigen::Index B = X.rows(), d = X.cols();
  if (model.constant_coefficients()) {
    s.constant = true;
    s.sigma = model.diffusion(t, X.row(0).transpose());
    return s;
  }
  s.rows.assign(d, Matrix(B, d));
  for (Eigen::Index b = 0; b < B; ++b) {
    const Matrix sig = model.diffusion(t, X.row(b).transpose());
    for (Eigen::Index k = 0; k < d; ++k) s.rows[k].row(b) = sig.row(k);
  }
  return s;
}

Matrix SigmaRows::apply(const Matrix& A) const {
  if (constant) return A * sigma;
  Matrix out = Matrix::Zero(A.rows(), A.cols());
  for (std::size_t k = 0; k < rows.size(); ++k)
    out.array() += rows[k].array().colwise() * A.col(static_cast<Eigen::Index>(k)).array();
  return out;
}

ad::Var SigmaRows::apply(const ad::Var& A) const {
  if (constant) return ad::matmul(A, ad::Var::constant(sigma));
  const Eigen::Index d = A.cols();
  ad::Var out;
  for (Eigen::Index k = 0; k < d; ++k) {
    const ad::Var term =
        ad::mul(ad::expand_cols(ad::col(A, k), d), ad::Var::constant(rows[k]));
    out = out.defined() ? ad::add(out, term) : term;
  }
  return out;
}

ZLossInputs z_loss_inputs(const FbsdeModel& model, const StageBatch& batch,
                          const NextStageData& next) {
  const Eigen::Index B = batch.X.rows(), d = batch.X.cols();
  ZLossInputs in;
  in.target.resize(B, d);
  for (Eigen::Index b = 0; b < B; ++b)
    in.target.row(b) = (1.0 + batch.dt * next.f_y(b)) * next.dy.row(b) +
                       batch.dt * next.f_x.row(b) * unflatten(batch.DX, b, d);
  in.v = batch.dt * next.f_z - batch.dW;
  in.sigma = SigmaRows::at(model, batch.t, batch.X);
  return in;
}

Matrix euler_z_target(const StageBatch& batch, const Vector& y_next) {
  return (batch.dW.array().colwise() * y_next.array()).matrix() / batch.dt;
}

ad::Var loss_zgamma(const ZLossInputs& in, const ad::Var& psi_out, const ad::Var& chi_out) {
  const Eigen::Index B = in.target.rows(), d = in.target.cols();
  if (psi_out.rows() != B || psi_out.cols() != d || chi_out.rows() != B ||
      chi_out.cols() != d * d)
    throw InvalidArgument("loss_zgamma: network outputs have the wrong shape");
  // (v χ)_j = Σ_i v_i χ_ij
  ad::Var vchi;
  for (Eigen::Index i = 0; i < d; ++i) {
    const ad::Var term = ad::mul(ad::col_block(chi_out, i * d, d),
                                 ad::Var::constant(in.v.col(i).replicate(1, d)));
    vchi = vchi.defined() ? ad::add(vchi, term) : term;
  }
  const ad::Var r =
      ad::add(ad::sub(ad::Var::constant(in.target), psi_out), in.sigma.apply(vchi));
  return ad::scale(ad::sum_all(ad::mul(r, r)), 1.0 / static_cast<double>(B));
}

ad::Var loss_zd(const ZLossInputs& in, const ad::Var& psi_out, const ad::Var& X) {
  const Eigen::Index B = in.target.rows(), d = in.target.cols();
  if (psi_out.rows() != B || psi_out.cols() != d || X.rows() != B || X.cols() != d)
    throw InvalidArgument("loss_zd: network output has the wrong shape");
  const ad::Var vjac = ad::grad(psi_out, ad::Var::constant(in.v), {X}, true)[0];
  const ad::Var r =
      ad::add(ad::sub(ad::Var::constant(in.target), psi_out), in.sigma.apply(vjac));
  return ad::scale(ad::sum_all(ad::mul(r, r)), 1.0 / static_cast<double>(B));
}

YLossInputs y_loss_inputs(const FbsdeModel& model, const StageBatch& batch,
                          const NextStageData& next, const Matrix& z_n, double theta) {
  if (theta < 0.0 || theta > 1.0) throw InvalidArgument("theta_y must lie in [0, 1]");
  const Eigen::Index B = batch.X.rows(), d = batch.X.cols();
  check_rows(z_n, B, d, "z_n");
  YLossInputs in;
  in.model = &model;
  in.t = batch.t;
  in.dt = batch.dt;
  in.theta = theta;
  in.X = batch.X;
  in.z = z_n;
  in.base = next.y + (1.0 - theta) * batch.dt * next.f -
            z_n.cwiseProduct(batch.dW).rowwise().sum();
  return in;
}

namespace {

ad::RowDriver driver_rows(const FbsdeModel& model, double t, const Matrix& X, const Matrix& y,
                          const Matrix& z) {
  const Eigen::Index B = X.rows(), d = X.cols();
  ad::RowDriver r;
  r.value.resize(B, 1);
  r.dy.resize(B, 1);
  r.dz.resize(B, d);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Vector x = X.row(b).transpose();
    const RowVector zb = z.row(b);
    r.value(b, 0) = model.driver(t, x, y(b, 0), zb);
    r.dy(b, 0) = model.driver_dy(t, x, y(b, 0), zb);
    r.dz.row(b) = model.driver_dz(t, x, y(b, 0), zb);
  }
  return r;
}

}  // namespace

ad::Var loss_y(const YLossInputs& in, const ad::Var& phi_out) {
  const Eigen::Index B = in.base.rows();
  if (phi_out.rows() != B || phi_out.cols() != 1)
    throw InvalidArgument("loss_y: network output has the wrong shape");
  ad::Var r = ad::sub(ad::Var::constant(in.base), phi_out);
  if (in.theta > 0.0) {
    const ad::Var f = ad::driver_op(
        phi_out, ad::Var::constant(in.z), [&](const Matrix& y, const Matrix& z) {
          return driver_rows(*in.model, in.t, in.X, y, z);
        });
    r = ad::add(r, ad::scale(f, in.theta * in.dt));
  }
  return ad::scale(ad::sum_all(ad::mul(r, r)), 1.0 / static_cast<double>(B));
}

ad::Var loss_dbdp1(const FbsdeModel& model, const StageBatch& batch, const Vector& y_next,
                   const ad::Var& phi_out, const ad::Var& psi_out) {
  const Eigen::Index B = batch.X.rows(), d = batch.X.cols();
  if (phi_out.rows() != B || phi_out.cols() != 1 || psi_out.rows() != B || psi_out.cols() != d)
    throw InvalidArgument("loss_dbdp1: network outputs have the wrong shape");
  const ad::Var f = ad::driver_op(phi_out, psi_out, [&](const Matrix& y, const Matrix& z) {
    return driver_rows(model, batch.t, batch.X, y, z);
  });
  const ad::Var zdw = ad::row_sum(ad::mul(psi_out, ad::Var::constant(batch.dW)));
  const ad::Var r = ad::sub(ad::add(ad::sub(ad::Var::constant(y_next), phi_out),
                                    ad::scale(f, batch.dt)),
                            zdw);
  return ad::scale(ad::sum_all(ad::mul(r, r)), 1.0 / static_cast<double>(B));
}

double loss_zgamma(const StageBatch& batch, const Network& psi, const Network& chi,
                   const FbsdeModel& model, const StageTriple& next) {
  const ZLossInputs in = z_loss_inputs(model, batch, next_stage_data(model, batch, next));
  ad::NoGradGuard off;
  return loss_zgamma(in, ad::Var::constant(psi.evaluate(batch.X)),
                     ad::Var::constant(chi.evaluate(batch.X)))
      .scalar();
}

double loss_zd(const StageBatch& batch, const Network& psi, const FbsdeModel& model,
               const StageTriple& next) {
  const ZLossInputs in = z_loss_inputs(model, batch, next_stage_data(model, batch, next));
  ad::EnableGradGuard on;
  const ad::Var X = ad::Var::leaf(batch.X);
  const ad::Var out = forward(psi.architecture(), parameter_constants(psi), X);
  return loss_zd(in, out, X).scalar();
}

double loss_y(const StageBatch& batch, const Network& phi, const FbsdeModel& model,
              const StageTriple& next, const Matrix& z_n, double theta) {
  const YLossInputs in = y_loss_inputs(model, batch, next_stage_data(model, batch, next), z_n, theta);
  ad::NoGradGuard off;
  return loss_y(in, ad::Var::constant(phi.evaluate(batch.X))).scalar();
}

}  // namespace fbsde
