#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "fbsde/core/brownian.hpp"
#include "fbsde/core/errors.hpp"
#include "fbsde/core/philox.hpp"
#include "fbsde/deep/deep_solver.hpp"
#include "fbsde/deep/losses.hpp"
#include "fbsde/models/examples.hpp"
#include "fbsde/neural/checkpoint.hpp"
#include "fbsde/sde/sde_sim.hpp"
#include "neural_checks.hpp"

using namespace fbsde;

namespace {

ModelPtr abm(double a) {
  return make_linear_abm(Vector::Constant(1, 0.5), Vector::Zero(1), Matrix::Identity(1, 1),
                         RowVector::Constant(1, a), 1.0);
}

Matrix flat_jacobian_fd(const StageTriple& s, const Vector& x, double h = 1e-5) {
  const auto d = x.size();
  Matrix J(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    Vector xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    J.col(j) = ((s.z(xp) - s.z(xm)) / (2 * h)).transpose();
  }
  return J;
}

Matrix at(const Matrix& rows, Eigen::Index b, Eigen::Index d) {
  Matrix m(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rows(b, i * d + j);
  return m;
}

/// Scalar expansion of the Z/Γ loss; chi_rows row b holds χ(X_n(b)) row-major.
double zgamma_oracle(const FbsdeModel& model, const StageBatch& batch, const StageTriple& next,
                     const Matrix& psi, const Matrix& chi_rows) {
  const Eigen::Index B = batch.X.rows(), d = batch.X.cols();
  double total = 0.0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const Vector xn = batch.X_next.row(b).transpose();
    const Vector x = batch.X.row(b).transpose();
    const double y1 = next.y(xn);
    const RowVector z1 = next.z(xn);
    const Matrix inv = model.diffusion_inv(batch.t_next, xn);
    const Matrix sig = model.diffusion(batch.t, x);
    const Matrix DX = at(batch.DX, b, d);
    const Matrix chi = at(chi_rows, b, d);
    const double fy = model.driver_dy(batch.t_next, xn, y1, z1);
    const RowVector fx = model.driver_dx(batch.t_next, xn, y1, z1);
    const RowVector fz = model.driver_dz(batch.t_next, xn, y1, z1);
    for (Eigen::Index j = 0; j < d; ++j) {
      double dy = 0.0, fxdx = 0.0, dz = 0.0;
      for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index k = 0; k < d; ++k) dy += z1(i) * inv(i, k) * DX(k, j);
      for (Eigen::Index k = 0; k < d; ++k) fxdx += fx(k) * DX(k, j);
      for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index k = 0; k < d; ++k)
          dz += (batch.dt * fz(i) - batch.dW(b, i)) * chi(i, k) * sig(k, j);
      const double r = (1.0 + batch.dt * fy) * dy + batch.dt * fxdx - psi(b, j) + dz;
      total += r * r;
    }
  }
  return total / static_cast<double>(B);
}

double y_oracle(const FbsdeModel& model, const StageBatch& batch, const StageTriple& next,
                const Vector& phi, const Matrix& z, double theta) {
  const Eigen::Index B = batch.X.rows(), d = batch.X.cols();
  double total = 0.0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const Vector xn = batch.X_next.row(b).transpose();
    const Vector x = batch.X.row(b).transpose();
    const double y1 = next.y(xn);
    const double f1 = model.driver(batch.t_next, xn, y1, next.z(xn));
    double zdw = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) zdw += z(b, i) * batch.dW(b, i);
    double r = y1 + (1.0 - theta) * batch.dt * f1 - phi(b) - zdw;
    if (theta > 0.0) r += theta * batch.dt * model.driver(batch.t, x, phi(b), z.row(b));
    total += r * r;
  }
  return total / static_cast<double>(B);
}

struct Ex3Fixture {
  ModelPtr model = make_example3(2);
  TimeGrid grid{10.0, 5};
  StageBatch batch = make_stage_batch(*model, grid, 2, 3, 91);
  StageTriple next = StageTriple::reference(model, 3, grid.time(3));
};

TrainConfig small_config(DeepVariant v) {
  TrainConfig c;
  c.variant = v;
  c.batch = 32;
  c.iters_first = 15;
  c.iters_rest = 10;
  c.layers = 2;
  c.width = 8;
  c.seed = 5;
  return c;
}

bool same_networks(const DeepSolution& a, const DeepSolution& b) {
  if (a.stages.size() != b.stages.size()) return false;
  for (std::size_t n = 0; n + 1 < a.stages.size(); ++n) {
    if (a.stages[n].phi().flatten() != b.stages[n].phi().flatten()) return false;
    if (a.stages[n].psi().flatten() != b.stages[n].psi().flatten()) return false;
    if (a.stages[n].has_chi() != b.stages[n].has_chi()) return false;
    if (a.stages[n].has_chi() && a.stages[n].chi().flatten() != b.stages[n].chi().flatten())
      return false;
  }
  for (std::size_t n = 0; n < a.curves.size(); ++n)
    if (a.curves[n].z_loss != b.curves[n].z_loss || a.curves[n].y_loss != b.curves[n].y_loss)
      return false;
  return true;
}

}  // namespace

TEST(TerminalStage, Example2AtOne) {
  const auto model = make_example2(1);
  const StageTriple s = terminal_stage(model, 10);
  const Vector x = Vector::Constant(1, 1.0);
  EXPECT_NEAR(s.y(x), 1.0, 1e-14);
  EXPECT_NEAR(s.z(x)(0), 2.0 * std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(s.gamma(x)(0, 0), 2.0 * std::sqrt(2.0), 1e-14);
}

TEST(TerminalStage, Example1AtZero) {
  const auto model = make_example1(1, 0.5, 1.0, 0.6);
  const StageTriple s = terminal_stage(model, 10);
  const double w = std::exp(0.5);
  EXPECT_NEAR(s.y(Vector(Vector::Zero(1))), 0.6 + w / (1.0 + w), 1e-14);
  EXPECT_NEAR(s.y(Vector(Vector::Zero(1))), 1.2224593312018546, 1e-14);
}

TEST(TerminalStage, GammaMatchesDifferencedZ) {
  const ModelPtr models[] = {make_example1(2), make_example2(2), make_example3(2)};
  UniformStream u(17);
  for (const auto& m : models) {
    const StageTriple s = terminal_stage(m, 4);
    for (int k = 0; k < 5; ++k) {
      const Vector x = m->x0() + 0.5 * oracle::random_matrix(u, 2, 1);
      EXPECT_LT((s.gamma(x) - flat_jacobian_fd(s, x)).cwiseAbs().maxCoeff(), 1e-6) << m->name();
    }
  }
}

TEST(TerminalStage, BatchRowsMatchPoints) {
  const auto model = make_example3(2);
  const StageTriple s = terminal_stage(model, 4);
  UniformStream u(3);
  const Matrix X = oracle::random_matrix(u, 4, 2);
  const Matrix G = s.gamma(X);
  for (Eigen::Index b = 0; b < 4; ++b) {
    const Vector x = X.row(b).transpose();
    EXPECT_DOUBLE_EQ(s.y(X)(b), s.y(x));
    EXPECT_EQ(at(G, b, 2), s.gamma(x));
  }
}

TEST(StageBatch, MatchesEulerPaths) {
  const auto model = make_example3(2);
  const TimeGrid grid(10.0, 6);
  const StageBatch batch = make_stage_batch(*model, grid, 3, 8, 77);
  const PathEnsemble paths = euler_maruyama(*model, sample_brownian(grid, 2, 8, 77));
  EXPECT_EQ(batch.X, paths.X[3]);
  EXPECT_EQ(batch.X_next, paths.X[4]);
  EXPECT_EQ(batch.DX, paths.DX[3]);
  EXPECT_DOUBLE_EQ(batch.t, grid.time(3));
  EXPECT_DOUBLE_EQ(batch.t_next, grid.time(4));
}

TEST(StageBatch, ConstantCoefficientShortcut) {
  const auto model = make_example2(2);
  const TimeGrid grid(0.5, 4);
  const StageBatch batch = make_stage_batch(*model, grid, 1, 6, 12);
  const PathEnsemble paths = euler_maruyama(*model, sample_brownian(grid, 2, 6, 12));
  EXPECT_LT((batch.X_next - paths.X[2]).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((batch.DX - paths.DX[1]).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(StageBatch, RejectsLastStep) {
  const auto model = make_example1(1);
  EXPECT_THROW(make_stage_batch(*model, TimeGrid(0.5, 4), 4, 2, 1), InvalidArgument);
}

TEST(DyEstimate, IdentityFactors) {
  const auto model = make_example1(2);
  UniformStream u(4);
  const Matrix z = oracle::random_matrix(u, 3, 2);
  Matrix DX(3, 4);
  DX.rowwise() = RowVector{{1.0, 0.0, 0.0, 1.0}};
  EXPECT_EQ(dy_estimate(z, *model, 0.2, Matrix::Zero(3, 2), DX), z);
}

TEST(DyEstimate, ConstantSigmaCancels) {
  Matrix sigma(2, 2);
  sigma << 0.7, 0.2, -0.1, 0.9;
  const auto model = make_linear_abm(Vector::Zero(2), Vector::Zero(2), sigma,
                                     RowVector::Ones(2), 1.0);
  UniformStream u(5);
  const Matrix z = oracle::random_matrix(u, 4, 2);
  Matrix DX(4, 4);
  DX.rowwise() = RowVector{{0.7, 0.2, -0.1, 0.9}};
  EXPECT_LT((dy_estimate(z, *model, 0.3, Matrix::Zero(4, 2), DX) - z).cwiseAbs().maxCoeff(),
            1e-14);
}

TEST(DyEstimate, Example3Scalar) {
  const auto model = make_example3(1);
  const TimeGrid grid(10.0, 8);
  const StageBatch batch = make_stage_batch(*model, grid, 4, 16, 8);
  UniformStream u(6);
  const Matrix z = oracle::random_matrix(u, 16, 1);
  const Matrix dy = dy_estimate(z, *model, batch.t_next, batch.X_next, batch.DX);
  for (Eigen::Index b = 0; b < 16; ++b) {
    const double sigma = model->diffusion(batch.t_next, batch.X_next.row(b).transpose())(0, 0);
    EXPECT_NEAR(dy(b, 0), z(b, 0) * batch.DX(b, 0) / sigma, 1e-12);
  }
}

TEST(DyEstimate, ShapeMismatch) {
  const auto model = make_example1(2);
  EXPECT_THROW(dy_estimate(Matrix::Zero(3, 1), *model, 0.1, Matrix::Zero(3, 2), Matrix::Zero(3, 4)),
               InvalidArgument);
}

TEST(LossZGamma, ExactCancellation) {
  ZLossInputs in;
  in.target = Matrix{{0.3, -1.2}};
  in.v = Matrix::Zero(1, 2);
  in.sigma.constant = true;
  in.sigma.sigma = Matrix::Identity(2, 2);
  const ad::Var loss = loss_zgamma(in, ad::Var::constant(in.target),
                                   ad::Var::constant(Matrix::Zero(1, 4)));
  EXPECT_EQ(loss.scalar(), 0.0);
}

TEST(LossZGamma, TargetOnly) {
  UniformStream u(8);
  ZLossInputs in;
  in.target = oracle::random_matrix(u, 5, 3);
  in.v = oracle::random_matrix(u, 5, 3);
  in.sigma.constant = true;
  in.sigma.sigma = Matrix::Identity(3, 3);
  const ad::Var loss = loss_zgamma(in, ad::Var::constant(Matrix::Zero(5, 3)),
                                   ad::Var::constant(Matrix::Zero(5, 9)));
  EXPECT_NEAR(loss.scalar(), in.target.squaredNorm() / 5.0, 1e-15);
}

TEST(LossZGamma, MatchesScalarExpansion) {
  Ex3Fixture fx;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Network psi = oracle::random_network(oracle::small_arch(2, OutputShape::row, true), seed);
    const Network chi =
        oracle::random_network(oracle::small_arch(2, OutputShape::matrix, true), seed + 100);
    const double got = loss_zgamma(fx.batch, psi, chi, *fx.model, fx.next);
    const double want = zgamma_oracle(*fx.model, fx.batch, fx.next, psi.evaluate(fx.batch.X),
                                      chi.evaluate(fx.batch.X));
    EXPECT_NEAR(got, want, 1e-12 * std::max(1.0, std::abs(want)));
  }
}

TEST(LossZGamma, DriverGradientsMatter) {
  // Example 2 has f_z = −z, so the Δt f_z χ σ term is active.
  const auto model = make_example2(2);
  const TimeGrid grid(0.5, 4);
  const StageBatch batch = make_stage_batch(*model, grid, 1, 3, 14);
  const StageTriple next = StageTriple::reference(model, 2, grid.time(2));
  const Network psi = oracle::random_network(oracle::small_arch(2, OutputShape::row, true), 1);
  const Network chi = oracle::random_network(oracle::small_arch(2, OutputShape::matrix, true), 2);
  const double want =
      zgamma_oracle(*model, batch, next, psi.evaluate(batch.X), chi.evaluate(batch.X));
  EXPECT_NEAR(loss_zgamma(batch, psi, chi, *model, next), want, 1e-12 * std::max(1.0, want));
}

TEST(LossZGamma, ShapeMismatch) {
  ZLossInputs in;
  in.target = Matrix::Zero(2, 2);
  in.v = Matrix::Zero(2, 2);
  in.sigma.constant = true;
  in.sigma.sigma = Matrix::Identity(2, 2);
  EXPECT_THROW(loss_zgamma(in, ad::Var::constant(Matrix::Zero(2, 2)),
                           ad::Var::constant(Matrix::Zero(2, 2))),
               InvalidArgument);
}

TEST(LossZD, JacobianSubstitution) {
  Ex3Fixture fx;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Network psi =
        oracle::random_network(oracle::small_arch(2, OutputShape::row, true), seed + 7);
    const double got = loss_zd(fx.batch, psi, *fx.model, fx.next);
    const double want = zgamma_oracle(*fx.model, fx.batch, fx.next, psi.evaluate(fx.batch.X),
                                      psi.batch_input_jacobian(fx.batch.X));
    EXPECT_NEAR(got, want, 1e-12 * std::max(1.0, std::abs(want)));
  }
}

TEST(LossZD, LinearMapEqualsConstantChi) {
  UniformStream u(21);
  ZLossInputs in;
  in.target = oracle::random_matrix(u, 4, 2);
  in.v = oracle::random_matrix(u, 4, 2);
  in.sigma.constant = true;
  in.sigma.sigma = Matrix{{0.8, 0.1}, {0.0, 1.3}};
  const Matrix A = oracle::random_matrix(u, 2, 2);
  const Matrix Xv = oracle::random_matrix(u, 4, 2);

  ad::EnableGradGuard on;
  const ad::Var X = ad::Var::leaf(Xv);
  const ad::Var psi = ad::matmul_nt(X, ad::Var::constant(A));
  const double zd = loss_zd(in, psi, X).scalar();
  const RowVector a = Eigen::Map<const Eigen::Matrix<double, 1, 4>>(
      Eigen::Matrix<double, 2, 2, Eigen::RowMajor>(A).data());
  const double zg =
      loss_zgamma(in, ad::Var::constant(Xv * A.transpose()), ad::Var::constant(a.replicate(4, 1)))
          .scalar();
  EXPECT_NEAR(zd, zg, 1e-13 * std::max(1.0, zg));
}

TEST(LossZD, ZeroIncrementsLeaveTargetGap) {
  UniformStream u(22);
  ZLossInputs in;
  in.target = oracle::random_matrix(u, 6, 2);
  in.v = Matrix::Zero(6, 2);
  in.sigma.constant = true;
  in.sigma.sigma = Matrix::Identity(2, 2);
  const Network psi = oracle::random_network(oracle::small_arch(2, OutputShape::row, true), 4);
  const Matrix Xv = oracle::random_matrix(u, 6, 2);
  ad::EnableGradGuard on;
  const ad::Var X = ad::Var::leaf(Xv);
  const ad::Var out = forward(psi.architecture(), parameter_constants(psi), X);
  const double want = (in.target - psi.evaluate(Xv)).squaredNorm() / 6.0;
  EXPECT_NEAR(loss_zd(in, out, X).scalar(), want, 1e-13 * std::max(1.0, want));
}

TEST(LossZD, ParameterGradientThroughJacobian) {
  Ex3Fixture fx;
  const ZLossInputs in =
      z_loss_inputs(*fx.model, fx.batch, next_stage_data(*fx.model, fx.batch, fx.next));
  const Network psi = oracle::random_network(oracle::small_arch(2, OutputShape::row, true), 9);
  const double err = oracle::parameter_gradient_error(psi, [&](const std::vector<ad::Var>& p) {
    const ad::Var X = ad::Var::leaf(fx.batch.X);
    return loss_zd(in, forward(psi.architecture(), p, X), X);
  });
  EXPECT_LT(err, 1e-5);
}

TEST(LossY, ExactCancellation) {
  const auto model = abm(1.0);
  const TimeGrid grid(1.0, 4);
  StageBatch batch = make_stage_batch(*model, grid, 1, 4, 2);
  batch.dW.setZero();
  const StageTriple next = StageTriple::terminal(model, 2);
  NextStageData nd = next_stage_data(*model, batch, next);
  const YLossInputs in = y_loss_inputs(*model, batch, nd, Matrix::Zero(4, 1), 1.0);
  EXPECT_EQ(loss_y(in, ad::Var::constant(Matrix(nd.y))).scalar(), 0.0);
}

TEST(LossY, MatchesScalarExpansion) {
  Ex3Fixture fx;
  const Network phi = oracle::random_network(oracle::small_arch(2, OutputShape::scalar, true), 3);
  UniformStream u(30);
  const Matrix z = oracle::random_matrix(u, 3, 2);
  const Vector phi_x = phi.evaluate(fx.batch.X);
  for (double theta : {0.0, 0.5, 1.0}) {
    const double got = loss_y(fx.batch, phi, *fx.model, fx.next, z, theta);
    const double want = y_oracle(*fx.model, fx.batch, fx.next, phi_x, z, theta);
    EXPECT_NEAR(got, want, 1e-12 * std::max(1.0, want)) << theta;
  }
}

TEST(LossY, ExplicitBoundaryIgnoresCurrentDriver) {
  Ex3Fixture fx;
  const NextStageData nd = next_stage_data(*fx.model, fx.batch, fx.next);
  UniformStream u(31);
  const Matrix z = oracle::random_matrix(u, 3, 2);
  const YLossInputs in = y_loss_inputs(*fx.model, fx.batch, nd, z, 0.0);
  const Matrix phi = oracle::random_matrix(u, 3, 1);
  const Vector r = nd.y + fx.batch.dt * nd.f - (z.cwiseProduct(fx.batch.dW)).rowwise().sum() -
                   Vector(phi.col(0));
  EXPECT_NEAR(loss_y(in, ad::Var::constant(phi)).scalar(), r.squaredNorm() / 3.0, 1e-13);
}

TEST(LossY, RejectsTheta) {
  Ex3Fixture fx;
  const NextStageData nd = next_stage_data(*fx.model, fx.batch, fx.next);
  EXPECT_THROW(y_loss_inputs(*fx.model, fx.batch, nd, Matrix::Zero(3, 2), 1.5), InvalidArgument);
  EXPECT_THROW(y_loss_inputs(*fx.model, fx.batch, nd, Matrix::Zero(3, 2), -0.1), InvalidArgument);
}

TEST(LossDbdp1, MatchesScalarExpansion) {
  Ex3Fixture fx;
  const Network phi = oracle::random_network(oracle::small_arch(2, OutputShape::scalar, true), 5);
  const Network psi = oracle::random_network(oracle::small_arch(2, OutputShape::row, true), 6);
  const Vector y1 = fx.next.y(fx.batch.X_next);
  const Vector p = phi.evaluate(fx.batch.X);
  const Matrix z = psi.evaluate(fx.batch.X);
  double want = 0.0;
  for (Eigen::Index b = 0; b < 3; ++b) {
    const Vector x = fx.batch.X.row(b).transpose();
    const double r = y1(b) - p(b) +
                     fx.batch.dt * fx.model->driver(fx.batch.t, x, p(b), z.row(b)) -
                     z.row(b).dot(fx.batch.dW.row(b));
    want += r * r / 3.0;
  }
  ad::NoGradGuard off;
  const double got =
      loss_dbdp1(*fx.model, fx.batch, y1, ad::Var::constant(p), ad::Var::constant(z)).scalar();
  EXPECT_NEAR(got, want, 1e-12 * std::max(1.0, want));
}

TEST(VarianceTargets, OsmTargetIsTheMalliavinChainRule) {
  // With exact stage-(n+1) evaluators on Example 2, the OSM target at n = 0 is
  // (1 + Δt f_y) z σ⁻¹ D_0X_1 + Δt f_x D_0X_1 = z_1 (f_y = f_x = 0, D_0X_1 = σ).
  const auto model = make_example2(1);
  const TimeGrid grid(0.5, 10);
  const StageBatch batch = make_stage_batch(*model, grid, 0, 64, 3);
  const StageTriple next = StageTriple::reference(model, 1, grid.time(1));
  const NextStageData nd = next_stage_data(*model, batch, next);
  const ZLossInputs in = z_loss_inputs(*model, batch, nd);
  EXPECT_LT((in.target - nd.z).cwiseAbs().maxCoeff(), 1e-14);
  const Matrix e = euler_z_target(batch, nd.y);
  for (Eigen::Index b = 0; b < 4; ++b)
    EXPECT_DOUBLE_EQ(e(b, 0), batch.dW(b, 0) * nd.y(b) / batch.dt);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.theta_y = 1.5;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.theta_y = 0.0;
  c.batch = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_EQ(TrainConfig::full_budget().batch, 1024u);
  EXPECT_EQ(TrainConfig::full_budget().iters_first, 32768u);
  EXPECT_EQ(TrainConfig::full_budget().iters_rest, 2048u);
  EXPECT_EQ(TrainConfig{}.architecture(3, OutputShape::row).widths,
            (std::vector<std::size_t>{103, 103}));
}

TEST(TrainConfig, VariantNames) {
  for (DeepVariant v : {DeepVariant::osm_p, DeepVariant::osm_d, DeepVariant::dbdp1})
    EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_variant("dbdp2"), InvalidArgument);
}

TEST(DeepSolve, StructureAndCurves) {
  const auto model = make_example1(1);
  const TimeGrid grid(0.5, 3);
  const DeepSolution sol = deep_solve(model, grid, small_config(DeepVariant::osm_p));
  ASSERT_EQ(sol.stages.size(), 4u);
  EXPECT_EQ(sol.stages[3].kind(), StageTriple::Kind::terminal);
  for (std::size_t n = 0; n < 3; ++n) {
    EXPECT_EQ(sol.stages[n].kind(), StageTriple::Kind::network);
    EXPECT_TRUE(sol.stages[n].has_chi());
    EXPECT_TRUE(sol.stages[n].phi().finite());
    EXPECT_EQ(sol.curves[n].stage, n);
    EXPECT_EQ(sol.curves[n].z_loss.size(), n == 2 ? 15u : 10u);
    EXPECT_EQ(sol.curves[n].y_loss.size(), n == 2 ? 15u : 10u);
  }
}

TEST(DeepSolve, OsmDUsesPsiJacobian) {
  const auto model = make_example1(1);
  const DeepSolution sol = deep_solve(model, TimeGrid(0.5, 2), small_config(DeepVariant::osm_d));
  const StageTriple& s = sol.stages[0];
  EXPECT_FALSE(s.has_chi());
  const Vector x = Vector::Constant(1, 0.8);
  EXPECT_EQ(s.gamma(x), s.psi().input_jacobian(x));
}

TEST(DeepSolve, Deterministic) {
  const auto model = make_example2(2);
  const TimeGrid grid(0.5, 3);
  for (DeepVariant v : {DeepVariant::osm_p, DeepVariant::osm_d, DeepVariant::dbdp1}) {
    const TrainConfig cfg = small_config(v);
    EXPECT_TRUE(same_networks(deep_solve(model, grid, cfg), deep_solve(model, grid, cfg)))
        << to_string(v);
  }
  TrainConfig other = small_config(DeepVariant::osm_p);
  other.seed = 6;
  EXPECT_FALSE(same_networks(deep_solve(model, grid, small_config(DeepVariant::osm_p)),
                             deep_solve(model, grid, other)));
}

TEST(DeepSolve, WarmStartCarriesParameters) {
  // With a single iteration per stage, stage n starts from stage n+1's weights.
  const auto model = make_example1(1);
  TrainConfig cfg = small_config(DeepVariant::osm_p);
  cfg.iters_first = cfg.iters_rest = 1;
  cfg.lr = LearningRateSchedule::constant(1e-3);
  const DeepSolution sol = deep_solve(model, TimeGrid(0.5, 3), cfg);
  const Vector a = sol.stages[1].psi().flatten(), b = sol.stages[0].psi().flatten();
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 2.5e-3);
  EXPECT_GT((a - b).cwiseAbs().maxCoeff(), 0.0);
}

TEST(DeepSolve, VariantMismatch) {
  const auto model = make_example1(1);
  EXPECT_THROW(osm_solve(model, TimeGrid(0.5, 2), small_config(DeepVariant::dbdp1)),
               InvalidArgument);
  EXPECT_THROW(dbdp1_solve(model, TimeGrid(0.5, 2), small_config(DeepVariant::osm_p)),
               InvalidArgument);
  EXPECT_THROW(deep_solve(model, TimeGrid(1.0, 2), small_config(DeepVariant::osm_p)),
               InvalidArgument);
  TrainConfig bad = small_config(DeepVariant::osm_p);
  bad.theta_y = 2.0;
  EXPECT_THROW(deep_solve(model, TimeGrid(0.5, 2), bad), InvalidArgument);
}

TEST(DeepSolve, DivergenceNamesStage) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto model = make_linear_abm(Vector::Zero(1), Vector::Zero(1), Matrix::Identity(1, 1),
                                     RowVector::Constant(1, nan), 1.0);
  TrainConfig cfg = small_config(DeepVariant::osm_p);
  cfg.divergence_patience = 5;
  try {
    deep_solve(model, TimeGrid(1.0, 3), cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.stage(), 2u);
  }
}

TEST(DeepSolve, CheckpointsAndCurveFile) {
  const auto dir = std::filesystem::temp_directory_path() / "fbsde_deep_test";
  std::filesystem::remove_all(dir);
  const auto model = make_example1(1);
  TrainConfig cfg = small_config(DeepVariant::osm_p);
  cfg.checkpoint_dir = dir.string();
  cfg.curve_path = (dir / "curve.csv").string();
  std::filesystem::create_directories(dir);
  const DeepSolution sol = deep_solve(model, TimeGrid(0.5, 2), cfg);
  for (const char* f : {"stage_0_phi.fbnn", "stage_0_psi.fbnn", "stage_0_chi.fbnn",
                        "stage_1_chi.fbnn"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  EXPECT_EQ(load_checkpoint((dir / "stage_0_psi.fbnn").string()).flatten(),
            sol.stages[0].psi().flatten());
  std::ifstream in(cfg.curve_path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "stage,iter,loss");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2u * 15u + 2u * 10u);
  std::filesystem::remove_all(dir);
}

TEST(DeepSolve, Dbdp1SingleStep) {
  const auto model = abm(0.7);
  TrainConfig cfg = small_config(DeepVariant::dbdp1);
  cfg.iters_first = 400;
  cfg.batch = 128;
  const DeepSolution sol = deep_solve(model, TimeGrid(1.0, 1), cfg);
  ASSERT_EQ(sol.stages.size(), 2u);
  EXPECT_EQ(sol.curves.size(), 1u);
  EXPECT_FALSE(sol.stages[0].has_chi());
  EXPECT_TRUE(sol.curves[0].y_loss.empty());
  EXPECT_NEAR(sol.stages[0].y(model->x0()), 0.7 * 0.5, 1e-2);
}

class ExactCase : public ::testing::TestWithParam<DeepVariant> {};

TEST_P(ExactCase, MartingaleSolutionAtDeskBudget) {
  const double a = 0.8;
  const auto model = abm(a);
  TrainConfig cfg;
  cfg.variant = GetParam();
  cfg.seed = 1;
  const DeepSolution sol = deep_solve(model, TimeGrid(1.0, 4), cfg);
  const Vector x0 = model->x0();
  EXPECT_LT(std::abs(sol.stages[0].y(x0) - a * x0(0)), 1e-2);
  if (cfg.variant != DeepVariant::dbdp1) {
    EXPECT_LT(std::abs(sol.stages[0].z(x0)(0) - a), 1e-2);
    EXPECT_LT(std::abs(sol.stages[0].gamma(x0)(0, 0)), 1e-2);
  }
}

INSTANTIATE_TEST_SUITE_P(Variants, ExactCase,
                         ::testing::Values(DeepVariant::osm_p, DeepVariant::osm_d,
                                           DeepVariant::dbdp1),
                         [](const auto& info) {
                           std::string s = to_string(info.param);
                           s.erase(std::remove(s.begin(), s.end(), '-'), s.end());
                           return s;
                         });
