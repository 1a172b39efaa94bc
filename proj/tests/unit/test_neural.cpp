#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>

#include "fbsde/core/errors.hpp"
#include "fbsde/neural/adam.hpp"
#include "fbsde/neural/checkpoint.hpp"
#include "neural_checks.hpp"

using namespace fbsde;

namespace {

std::vector<Architecture> grad_archs() {
  return {
      oracle::small_arch(1, OutputShape::scalar, false),
      oracle::small_arch(2, OutputShape::scalar, true),
      oracle::small_arch(3, OutputShape::row, true),
      oracle::small_arch(2, OutputShape::matrix, true),
      oracle::small_arch(2, OutputShape::row, true, true),
  };
}

double scalar_fd(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2 * h);
}

}  // namespace

TEST(Autodiff, ElementaryGradients) {
  UniformStream u(11);
  const Matrix av = oracle::random_matrix(u, 3, 4);
  const Matrix bv = oracle::random_matrix(u, 4, 2);
  const Matrix cv = oracle::random_matrix(u, 3, 4);
  const Matrix w = oracle::random_matrix(u, 3, 2);
  auto check = [&](const std::function<ad::Var(const ad::Var&)>& build, const Matrix& x0) {
    const ad::Var x = ad::Var::leaf(x0);
    const Matrix g = ad::grad(build(x), {x})[0].value();
    Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(x0.data(), x0.size());
    const auto f = [&](const Eigen::VectorXd& z) {
      ad::NoGradGuard off;
      return build(ad::Var::constant(Eigen::Map<const Matrix>(z.data(), x0.rows(), x0.cols())))
          .scalar();
    };
    const Eigen::RowVectorXd fd = oracle::gradient(f, flat);
    const Eigen::RowVectorXd gr = Eigen::Map<const Eigen::RowVectorXd>(g.data(), g.size());
    EXPECT_LT(oracle::rel_error(gr, fd), 1e-8);
  };
  const ad::Var B = ad::Var::constant(bv), C = ad::Var::constant(cv), W = ad::Var::constant(w);
  check([&](const ad::Var& a) { return ad::sum_all(ad::mul(ad::matmul(a, B), W)); }, av);
  check([&](const ad::Var& a) { return ad::sum_all(ad::mul(ad::matmul_nt(a, C), ad::Var::constant(Matrix::Ones(3, 3)))); }, av);
  check([&](const ad::Var& a) { return ad::sum_all(ad::mul(ad::matmul_tn(C, a), ad::Var::constant(Matrix::Ones(4, 4)))); }, av);
  check([&](const ad::Var& a) { return ad::sum_all(ad::mul(ad::tanh(a), C)); }, av);
  check([&](const ad::Var& a) { return ad::sum_all(ad::pow(ad::add_scalar(ad::mul(a, a), 0.5), -0.5)); }, av);
  check([&](const ad::Var& a) { return ad::mean_all(ad::mul(ad::expand_cols(ad::row_sum(a), 4), C)); }, av);
  check([&](const ad::Var& a) { return ad::sum_all(ad::mul(ad::expand_rows(ad::col_sum(a), 3), C)); }, av);
  check([&](const ad::Var& a) { return ad::sum_all(ad::mul(ad::place_col(ad::col(a, 2), 1, 4), C)); }, av);
  check([&](const ad::Var& a) { return ad::sum_all(ad::mul(ad::place_col_block(ad::col_block(a, 1, 2), 2, 4), C)); }, av);
  check([&](const ad::Var& a) { return ad::sum_all(ad::mul(ad::sub(a, ad::neg(ad::scale(a, 2.0))), C)); }, av);
  const ad::Var Wc = ad::Var::constant(oracle::random_matrix(u, 5, 4));
  const ad::Var bc = ad::Var::constant(oracle::random_matrix(u, 1, 5));
  const ad::Var D = ad::Var::constant(oracle::random_matrix(u, 3, 5));
  check([&](const ad::Var& a) { return ad::sum_all(ad::mul(ad::affine(a, Wc, bc), D)); }, av);
  check([&](const ad::Var& w) { return ad::sum_all(ad::mul(ad::affine(C, w, bc), D)); }, Wc.value());
  check([&](const ad::Var& b) { return ad::sum_all(ad::mul(ad::affine(C, Wc, b), D)); }, bc.value());
  check([&](const ad::Var& a) { return ad::sum_all(ad::mul(ad::center_rows(ad::mul(a, a)), C)); }, av);
  const ad::Var s3 = ad::Var::constant(oracle::random_matrix(u, 3, 1));
  check([&](const ad::Var& a) { return ad::sum_all(ad::mul(ad::scale_rows(ad::tanh(a), s3), C)); }, av);
  check([&](const ad::Var& s) { return ad::sum_all(ad::mul(ad::scale_rows(C, ad::mul(s, s)), C)); }, s3.value());
  const ad::Var g4 = ad::Var::constant(oracle::random_matrix(u, 1, 4));
  check([&](const ad::Var& a) { return ad::sum_all(ad::mul(ad::row_affine(ad::tanh(a), g4, g4), C)); }, av);
  check([&](const ad::Var& g) { return ad::sum_all(ad::mul(ad::row_affine(C, g, g), C)); }, g4.value());
}

TEST(Autodiff, TanhValuesAccurate) {
  Matrix x(1, 9);
  x << -20.0, -1.5, -0.011, -1e-9, 0.0, 3e-5, 0.0099, 0.7, 25.0;
  const Matrix t = ad::tanh_values(x);
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const double ref = std::tanh(x(0, i));
    EXPECT_LE(std::abs(t(0, i) - ref), 4e-16 * std::max(std::abs(ref), 1e-300) + 1e-300)
        << x(0, i);
  }
}

TEST(Autodiff, SecondDerivativeOfTanh) {
  // d/dx [d/dx tanh(x)] = −2 tanh(x)(1 − tanh²(x))
  const double x0 = 0.37;
  const ad::Var x = ad::Var::leaf(Matrix::Constant(1, 1, x0));
  const ad::Var dy = ad::grad(ad::tanh(x), {x}, true)[0];
  const double d2 = ad::grad(dy, {x})[0].scalar();
  const double t = std::tanh(x0);
  EXPECT_NEAR(d2, -2 * t * (1 - t * t), 1e-14);
}

TEST(Autodiff, SecondDerivativeOfPow) {
  const double x0 = 1.3;
  const ad::Var x = ad::Var::leaf(Matrix::Constant(1, 1, x0));
  const ad::Var dy = ad::grad(ad::pow(x, -0.5), {x}, true)[0];
  EXPECT_NEAR(ad::grad(dy, {x})[0].scalar(), 0.75 * std::pow(x0, -2.5), 1e-14);
}

TEST(Autodiff, UnreachableInputGetsZero) {
  const ad::Var a = ad::Var::leaf(Matrix::Ones(2, 2));
  const ad::Var b = ad::Var::leaf(Matrix::Ones(3, 1));
  const auto g = ad::grad(ad::sum_all(ad::mul(a, a)), {a, b});
  EXPECT_EQ(g[1].value(), Matrix::Zero(3, 1));
  EXPECT_EQ(g[0].value(), Matrix::Constant(2, 2, 2.0));
}

TEST(Autodiff, DetachedGradientsByDefault) {
  const ad::Var a = ad::Var::leaf(Matrix::Ones(2, 2));
  EXPECT_FALSE(ad::grad(ad::sum_all(ad::tanh(a)), {a})[0].requires_grad());
  EXPECT_TRUE(ad::grad(ad::sum_all(ad::tanh(a)), {a}, true)[0].requires_grad());
}

TEST(Autodiff, NoGradGuardRecordsNothing) {
  const ad::Var a = ad::Var::leaf(Matrix::Ones(2, 2));
  ad::NoGradGuard off;
  EXPECT_FALSE(ad::tanh(a).requires_grad());
}

TEST(Autodiff, FirstOrderPrimitivesRejectHigherOrder) {
  const ad::Var a = ad::Var::leaf(Matrix::Constant(2, 1, 0.5));
  const auto sq = [](const Matrix& m) {
    return std::make_pair(Matrix(m.cwiseAbs2()), Matrix(2.0 * m));
  };
  const ad::Var y = ad::sum_all(ad::pointwise(a, sq));
  EXPECT_NEAR(ad::grad(y, {a})[0].value()(0, 0), 1.0, 1e-15);
  EXPECT_THROW(ad::grad(y, {a}, true), UnsupportedOperation);
}

TEST(Autodiff, DriverOpPartials) {
  const ad::Var y = ad::Var::leaf(Matrix::Constant(2, 1, 0.3));
  const ad::Var z = ad::Var::leaf(Matrix::Constant(2, 2, 0.2));
  const auto fn = [](const Matrix& yv, const Matrix& zv) {
    ad::RowDriver r;
    r.value = yv.cwiseAbs2() + zv.rowwise().squaredNorm();
    r.dy = 2.0 * yv;
    r.dz = 2.0 * zv;
    return r;
  };
  const auto g = ad::grad(ad::sum_all(ad::driver_op(y, z, fn)), {y, z});
  EXPECT_NEAR(g[0].value()(1, 0), 0.6, 1e-15);
  EXPECT_NEAR(g[1].value()(0, 1), 0.4, 1e-15);
}

TEST(Autodiff, ShapeMismatchRejected) {
  const ad::Var a = ad::Var::leaf(Matrix::Ones(2, 3));
  EXPECT_THROW(ad::matmul(a, a), InvalidArgument);
  EXPECT_THROW(ad::add(a, ad::Var::constant(Matrix::Ones(3, 2))), InvalidArgument);
  EXPECT_THROW(ad::grad(a, {a}), InvalidArgument);
}

TEST(Architecture, Defaults) {
  const auto a = Architecture::standard(3, OutputShape::matrix);
  EXPECT_EQ(a.widths, (std::vector<std::size_t>{103, 103}));
  EXPECT_EQ(a.output_size(), 9u);
  EXPECT_EQ(Architecture::standard(3, OutputShape::row).output_size(), 3u);
  Architecture bad = a;
  bad.widths = {};
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad.widths = {4, 0};
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Network, ParameterCount) {
  const auto a = oracle::small_arch(2, OutputShape::row, true);
  const Network net(a);
  // (2·7+7) + (7·6+6) + (6·2+2) + (7+7)
  EXPECT_EQ(net.parameter_count(), 21u + 48u + 14u + 14u);
  Network copy = net;
  Vector flat = Vector::LinSpaced(net.parameter_count(), 0, 1);
  copy.assign(flat);
  EXPECT_EQ(copy.flatten(), flat);
  EXPECT_THROW(copy.assign(Vector::Zero(3)), InvalidArgument);
}

TEST(Glorot, BiasesZeroGainsOne) {
  const auto a = oracle::small_arch(2, OutputShape::row, true);
  const Network net = init_glorot(a, 3);
  for (std::size_t l = 0; l <= a.hidden_layers(); ++l) EXPECT_TRUE(net.bias(l).isZero(0));
  EXPECT_TRUE(net.gain(0).isOnes(0));
  EXPECT_TRUE(net.offset(0).isZero(0));
}

TEST(Glorot, WeightVariance) {
  Architecture a;
  a.input_dim = 256;
  a.widths = {256};
  const Network net = init_glorot(a, 5);
  const Matrix& W = net.weight(0);
  const double var = W.cwiseAbs2().mean() - std::pow(W.mean(), 2);
  const double expected = 2.0 / (256 + 256);
  EXPECT_LT(std::abs(var - expected) / expected, 0.1);
  const double bound = std::sqrt(6.0 / 512);
  EXPECT_LE(W.cwiseAbs().maxCoeff(), bound);
}

TEST(Glorot, Deterministic) {
  const auto a = oracle::small_arch(2, OutputShape::scalar, true);
  EXPECT_EQ(init_glorot(a, 9).flatten(), init_glorot(a, 9).flatten());
  EXPECT_NE(init_glorot(a, 9).flatten(), init_glorot(a, 10).flatten());
}

TEST(Forward, ZeroWeightsGiveOutputBias) {
  auto a = oracle::small_arch(2, OutputShape::row, true);
  Network net(a);
  net.bias(2) << 0.25, -1.5;
  Vector x(2);
  x << 0.3, 4.0;
  const Matrix out = net(x);
  EXPECT_EQ(out.rows(), 1);
  EXPECT_DOUBLE_EQ(out(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(out(0, 1), -1.5);
}

TEST(Forward, SingleUnitIsTanh) {
  Architecture a;
  a.input_dim = 1;
  a.widths = {1};
  Network net(a);
  net.weight(0)(0, 0) = 1.0;
  net.weight(1)(0, 0) = 1.0;
  for (double x : {-2.0, -0.1, 0.0, 0.7, 3.0})
    EXPECT_NEAR(net(Vector::Constant(1, x))(0, 0), std::tanh(x), 1e-15);
}

TEST(Forward, ConstantHiddenLayerStaysFinite) {
  // Every unit of the first hidden layer sees the same value, so its variance is 0.
  Architecture a;
  a.input_dim = 1;
  a.widths = {5, 3};
  a.layer_norm = true;
  Network net(a);
  net.weight(0).setConstant(0.4);
  net.weight(1).setConstant(0.2);
  net.weight(2).setConstant(1.0);
  const double y = net(Vector::Constant(1, 1.0))(0, 0);
  EXPECT_TRUE(std::isfinite(y));
  // Normalized vector is exactly zero, so layer 2 sees only its bias (0).
  EXPECT_NEAR(y, 0.0, 1e-12);
  a.layer_norm = false;
  Network plain(a);
  plain.params() = std::vector<Matrix>(net.params().begin(), net.params().begin() + 6);
  EXPECT_NEAR(plain(Vector::Constant(1, 1.0))(0, 0), 3 * std::tanh(5 * 0.2 * std::tanh(0.4)),
              1e-15);
}

TEST(Forward, GraphMatchesFastPath) {
  for (const auto& a : grad_archs()) {
    const Network net = oracle::random_network(a, 21);
    UniformStream u(4);
    const Matrix X = oracle::random_matrix(u, 6, a.input_dim, 2.0);
    const Matrix slow = forward(a, parameter_constants(net), ad::Var::constant(X)).value();
    EXPECT_LT((slow - net.evaluate(X)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Forward, RejectsWrongDimension) {
  const Network net(oracle::small_arch(2, OutputShape::scalar, true));
  EXPECT_THROW(net.evaluate(Matrix::Zero(3, 3)), InvalidArgument);
}

TEST(Forward, NonFiniteOutputRaises) {
  Network net(oracle::small_arch(1, OutputShape::scalar, false));
  net.bias(2)(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(net(Vector::Zero(1)), EvaluationFailure);
}

TEST(LayerNorm, ShiftInvariance) {
  // With normalization ahead of the activation, a common shift of layer-1
  // pre-activations cancels inside the norm.
  const auto a = oracle::small_arch(2, OutputShape::row, true, true);
  const Network net = oracle::random_network(a, 8);
  Network shifted = net;
  shifted.bias(0).array() += 3.7;
  UniformStream u(2);
  const Matrix X = oracle::random_matrix(u, 10, 2, 2.0);
  EXPECT_LT((net.evaluate(X) - shifted.evaluate(X)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LayerNorm, UnitMoments) {
  // gain 1 / offset 0: normalized layer has mean 0 and variance v/(v+ε).
  const auto a = oracle::small_arch(3, OutputShape::scalar, true, true);
  Network net = init_glorot(a, 2);
  UniformStream u(1);
  const Matrix X = oracle::random_matrix(u, 1, 3, 2.0);
  Matrix h = X * net.weight(0).transpose();
  const double mean = h.mean();
  const double var = (h.array() - mean).square().mean();
  const Matrix n = (h.array() - mean) / std::sqrt(var + kLayerNormEps);
  EXPECT_NEAR(n.mean(), 0.0, 1e-14);
  EXPECT_NEAR((n.array().square()).mean(), var / (var + kLayerNormEps), 1e-12);
  // Feed the normalized vector through the rest of the network by hand.
  Matrix h2 = n.array().tanh().matrix() * net.weight(1).transpose();
  Matrix out = h2.array().tanh().matrix() * net.weight(2).transpose();
  EXPECT_NEAR(net.evaluate(X)(0, 0), out(0, 0), 1e-13);
}

TEST(InputJacobian, ScalarTanh) {
  Architecture a;
  a.input_dim = 1;
  a.widths = {1};
  Network net(a);
  net.weight(0)(0, 0) = 2.0;
  net.weight(1)(0, 0) = 1.0;
  const double j = net.input_jacobian(Vector::Constant(1, 0.3))(0, 0);
  EXPECT_NEAR(j, 2.0 * (1.0 - std::pow(std::tanh(0.6), 2)), 1e-15);
  EXPECT_NEAR(j, 1.4231555, 1e-7);
}

TEST(InputJacobian, ZeroInnerWeights) {
  Network net(oracle::small_arch(3, OutputShape::row, true));
  net.bias(2).setConstant(1.0);
  net.weight(2).setConstant(0.5);
  EXPECT_TRUE(net.input_jacobian(Vector::Ones(3)).isZero(0));
}

TEST(InputJacobian, MatchesFiniteDifferences) {
  for (const auto& a : grad_archs())
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
      EXPECT_LT(oracle::input_jacobian_error(a, seed), 1e-6) << "seed " << seed;
}

TEST(InputJacobian, BatchLayout) {
  const auto a = oracle::small_arch(2, OutputShape::matrix, true);
  const Network net = oracle::random_network(a, 3);
  UniformStream u(3);
  const Matrix X = oracle::random_matrix(u, 4, 2);
  const Matrix J = net.batch_input_jacobian(X);
  ASSERT_EQ(J.cols(), 8);
  for (Eigen::Index b = 0; b < 4; ++b) {
    const Matrix Jb = net.input_jacobian(X.row(b).transpose());
    for (Eigen::Index k = 0; k < 4; ++k)
      for (Eigen::Index j = 0; j < 2; ++j) EXPECT_NEAR(J(b, k * 2 + j), Jb(k, j), 1e-13);
  }
}

TEST(GradParams, ValueLossMatchesFiniteDifferences) {
  for (const auto& a : grad_archs())
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
      EXPECT_LT(oracle::value_loss_gradient_error(a, seed), 1e-5) << "seed " << seed;
}

TEST(GradParams, JacobianLossMatchesFiniteDifferences) {
  for (const auto& a : grad_archs())
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
      EXPECT_LT(oracle::vjp_loss_gradient_error(a, seed), 1e-5) << "seed " << seed;
}

TEST(GradParams, IndependentBlockHasZeroGradient) {
  const auto a = oracle::small_arch(2, OutputShape::scalar, true);
  const Network psi = oracle::random_network(a, 1), chi = oracle::random_network(a, 2);
  auto p = parameter_leaves(psi);
  auto c = parameter_leaves(chi);
  const ad::Var X = ad::Var::constant(Matrix::Ones(3, 2));
  const ad::Var out = forward(a, p, X);
  std::vector<ad::Var> all = p;
  all.insert(all.end(), c.begin(), c.end());
  const auto g = ad::grad(ad::mean_all(ad::mul(out, out)), all);
  for (std::size_t i = p.size(); i < all.size(); ++i) EXPECT_TRUE(g[i].value().isZero(0));
  EXPECT_FALSE(g[0].value().isZero(0));
}

TEST(GradParams, ScalarTanhHandDerivative) {
  // loss = (v · d/dx tanh(wx))² = (v w (1 − t²))², t = tanh(wx)
  Architecture a;
  a.input_dim = 1;
  a.widths = {1};
  a.layer_norm = false;
  Network net(a);
  const double w = 0.8, x = 0.4, v = 1.7;
  net.weight(0)(0, 0) = w;
  net.weight(1)(0, 0) = 1.0;
  auto p = parameter_leaves(net);
  const ad::Var X = ad::Var::leaf(Matrix::Constant(1, 1, x));
  const ad::Var out = forward(a, p, X);
  const ad::Var j = ad::grad(out, ad::Var::constant(Matrix::Constant(1, 1, v)), {X}, true)[0];
  const double gw = ad::grad(ad::mul(j, j), p)[0].scalar();
  const auto loss = [&](double ww) {
    const double t = std::tanh(ww * x);
    return std::pow(v * ww * (1 - t * t), 2);
  };
  EXPECT_NEAR(gw, scalar_fd(loss, w), 1e-8);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<Matrix> p{Matrix::Constant(2, 2, 0.5)};
  AdamState s(p);
  ASSERT_TRUE(adam_step(s, p, {Matrix::Zero(2, 2)}, 0.01));
  EXPECT_EQ(p[0], Matrix::Constant(2, 2, 0.5));
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, FirstStepIsLearningRate) {
  std::vector<Matrix> p{Matrix::Constant(1, 1, 0.0)};
  AdamState s(p);
  ASSERT_TRUE(adam_step(s, p, {Matrix::Ones(1, 1)}, 0.01));
  EXPECT_NEAR(p[0](0, 0), -0.01, 1e-9);
}

TEST(Adam, RepeatedGradientDoesNotGrowStep) {
  std::vector<Matrix> p{Matrix::Constant(1, 1, 0.0)};
  AdamState s(p);
  adam_step(s, p, {Matrix::Ones(1, 1)}, 0.01);
  const double d1 = std::abs(p[0](0, 0));
  adam_step(s, p, {Matrix::Ones(1, 1)}, 0.01);
  const double d2 = std::abs(p[0](0, 0)) - d1;
  EXPECT_LE(d2, d1 * (1 + 1e-6));
}

TEST(Adam, NonFiniteGradientRejected) {
  std::vector<Matrix> p{Matrix::Constant(1, 2, 1.0)};
  AdamState s(p);
  Matrix g(1, 2);
  g << 1.0, std::nan("");
  std::string why;
  EXPECT_FALSE(adam_step(s, p, {g}, 0.01, &why));
  EXPECT_EQ(s.step, 0);
  EXPECT_EQ(p[0], Matrix::Constant(1, 2, 1.0));
  EXPECT_NE(why.find("block 0"), std::string::npos);
}

TEST(Adam, ShapeMismatch) {
  std::vector<Matrix> p{Matrix::Zero(1, 2)};
  AdamState s(p);
  EXPECT_THROW(adam_step(s, p, {Matrix::Zero(2, 1)}, 0.01), InvalidArgument);
}

TEST(LearningRate, PiecewiseDecay) {
  const LearningRateSchedule s;
  EXPECT_DOUBLE_EQ(s.at(0, 1000), 1e-3);
  EXPECT_DOUBLE_EQ(s.at(399, 1000), 1e-3);
  EXPECT_NEAR(s.at(400, 1000), 1e-4, 1e-19);
  EXPECT_NEAR(s.at(799, 1000), 1e-4, 1e-19);
  EXPECT_NEAR(s.at(800, 1000), 1e-5, 1e-20);
  EXPECT_DOUBLE_EQ(LearningRateSchedule::constant(0.5).at(999, 1000), 0.5);
}

TEST(Training, Deterministic) {
  const auto a = oracle::small_arch(1, OutputShape::scalar, true);
  auto train = [&] {
    Network net = init_glorot(a, 42);
    AdamState s(net.params());
    for (std::uint64_t it = 0; it < 50; ++it) {
      UniformStream u(derive_seed(42, seed_domain::train, it));
      const Matrix X = oracle::random_matrix(u, 16, 1, 2.0);
      const ad::Var Xv = ad::Var::constant(X);
      auto p = parameter_leaves(net);
      const ad::Var r = ad::sub(forward(a, p, Xv), ad::Var::constant(X.array().sin().matrix()));
      const auto g = ad::grad(ad::mean_all(ad::mul(r, r)), p);
      std::vector<Matrix> gv;
      for (const auto& x : g) gv.push_back(x.value());
      adam_step(s, net.params(), gv, 1e-2);
    }
    return net.flatten();
  };
  const Vector a1 = train(), a2 = train();
  EXPECT_EQ(a1, a2);
}

TEST(Checkpoint, RoundTrip) {
  for (const auto& a : grad_archs()) {
    const Network net = oracle::random_network(a, 77);
    const Network back = decode_checkpoint(encode_checkpoint(net));
    EXPECT_TRUE(back.architecture() == a);
    EXPECT_EQ(back.flatten(), net.flatten());
  }
}

TEST(Checkpoint, HeaderLayout) {
  Architecture a;
  a.input_dim = 2;
  a.shape = OutputShape::row;
  a.widths = {3};
  a.layer_norm = false;
  const Network net(a);
  const auto bytes = encode_checkpoint(net);
  ASSERT_EQ(bytes.size(), 36 + 4 * 1 + 8 * net.parameter_count());
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FBNN");
  EXPECT_EQ(bytes[4], 1);   // version
  EXPECT_EQ(bytes[8], 2);   // d
  EXPECT_EQ(bytes[12], 1);  // rows
  EXPECT_EQ(bytes[16], 2);  // cols
  EXPECT_EQ(bytes[20], 1);  // L
  EXPECT_EQ(bytes[24], 3);  // S_1
  EXPECT_EQ(bytes[28], 0);  // flags
  EXPECT_EQ(bytes[32], net.parameter_count());
}

TEST(Checkpoint, RejectsCorruption) {
  const Network net(oracle::small_arch(2, OutputShape::scalar, true));
  auto bytes = encode_checkpoint(net);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(decode_checkpoint(truncated), InvalidArgument);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(magic), InvalidArgument);
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(decode_checkpoint(extra), InvalidArgument);
}

TEST(Checkpoint, FileRoundTrip) {
  const Network net = oracle::random_network(oracle::small_arch(2, OutputShape::row, true), 5);
  const std::string path = ::testing::TempDir() + "net.fbnn";
  save_checkpoint(net, path);
  EXPECT_EQ(load_checkpoint(path).flatten(), net.flatten());
  std::remove(path.c_str());
}
