#include "fbsde/neural/network.hpp"

#include <cmath>

#include "fbsde/core/errors.hpp"
#include "fbsde/core/philox.hpp"

namespace fbsde {

std::size_t Architecture::out_rows() const {
  return shape == OutputShape::matrix ? input_dim : 1;
}

std::size_t Architecture::out_cols() const {
  return shape == OutputShape::scalar ? 1 : input_dim;
}

void Architecture::validate() const {
  if (input_dim < 1) throw InvalidArgument("network input dimension must be positive");
  if (widths.empty()) throw InvalidArgument("network needs at least one hidden layer");
  for (std::size_t w : widths)
    if (w < 1) throw InvalidArgument("hidden layer widths must be positive");
}

Architecture Architecture::standard(std::size_t d, OutputShape shape, std::size_t layers) {
  Architecture a;
  a.input_dim = d;
  a.shape = shape;
  a.widths.assign(layers, 100 + d);
  a.validate();
  return a;
}

bool operator==(const Architecture& a, const Architecture& b) {
  return a.input_dim == b.input_dim && a.shape == b.shape && a.widths == b.widths &&
         a.layer_norm == b.layer_norm && a.norm_before_activation == b.norm_before_activation;
}

Network::Network(Architecture arch) : arch_(std::move(arch)) {
  arch_.validate();
  const std::size_t L = arch_.hidden_layers();
  std::size_t fan_in = arch_.input_dim;
  for (std::size_t l = 0; l <= L; ++l) {
    const std::size_t fan_out = l < L ? arch_.widths[l] : arch_.output_size();
    params_.push_back(Matrix::Zero(fan_out, fan_in));
    params_.push_back(Matrix::Zero(1, fan_out));
    fan_in = fan_out;
  }
  for (std::size_t k = 0; k < arch_.norm_layers(); ++k) {
    params_.push_back(Matrix::Ones(1, arch_.widths[k]));
    params_.push_back(Matrix::Zero(1, arch_.widths[k]));
  }
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix& p : params_) n += p.size();
  return n;
}

Vector Network::flatten() const {
  Vector flat(parameter_count());
  Eigen::Index i = 0;
  for (const Matrix& p : params_)
    for (Eigen::Index r = 0; r < p.rows(); ++r)
      for (Eigen::Index c = 0; c < p.cols(); ++c) flat(i++) = p(r, c);
  return flat;
}

void Network::assign(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count())
    throw InvalidArgument("parameter vector length does not match the architecture");
  Eigen::Index i = 0;
  for (Matrix& p : params_)
    for (Eigen::Index r = 0; r < p.rows(); ++r)
      for (Eigen::Index c = 0; c < p.cols(); ++c) p(r, c) = flat(i++);
}

bool Network::finite() const {
  for (const Matrix& p : params_)
    if (!p.allFinite()) return false;
  return true;
}

namespace {

void layer_norm_inplace(Matrix& h, const Matrix& gain, const Matrix& offset) {
  const double inv_s = 1.0 / static_cast<double>(h.cols());
  const Vector mean = h.rowwise().sum() * inv_s;
  h.colwise() -= mean;
  const Vector var = h.cwiseAbs2().rowwise().sum() * inv_s;
  const Vector inv = (var.array() + kLayerNormEps).rsqrt();
  h = h.array().colwise() * inv.array();
  h = (h.array().rowwise() * gain.row(0).array()).rowwise() + offset.row(0).array();
}

}  // namespace

Matrix Network::evaluate(const Matrix& X) const {
  if (static_cast<std::size_t>(X.cols()) != arch_.input_dim)
    throw InvalidArgument("network input has the wrong dimension");
  const std::size_t L = arch_.hidden_layers();
  Matrix h = X;
  for (std::size_t l = 0; l < L; ++l) {
    Matrix a = h * weight(l).transpose();
    a.rowwise() += bias(l).row(0);
    const bool norm = arch_.layer_norm && l + 1 < L;
    if (norm && arch_.norm_before_activation) layer_norm_inplace(a, gain(l), offset(l));
    a = ad::tanh_values(a);
    if (norm && !arch_.norm_before_activation) layer_norm_inplace(a, gain(l), offset(l));
    h = std::move(a);
  }
  Matrix out = h * weight(L).transpose();
  out.rowwise() += bias(L).row(0);
  if (!out.allFinite()) throw EvaluationFailure("network produced a non-finite output");
  return out;
}

Matrix Network::operator()(const Vector& x) const {
  const Matrix flat = evaluate(x.transpose());
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), arch_.out_rows(), arch_.out_cols());
}

Matrix Network::input_jacobian(const Vector& x) const {
  const Matrix rows = batch_input_jacobian(x.transpose());
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      rows.data(), arch_.output_size(), arch_.input_dim);
}

Matrix Network::batch_input_jacobian(const Matrix& X) const {
  ad::EnableGradGuard on;
  const auto d = static_cast<Eigen::Index>(arch_.input_dim);
  const auto q = static_cast<Eigen::Index>(arch_.output_size());
  const ad::Var x = ad::Var::leaf(X);
  const ad::Var out = forward(arch_, parameter_constants(*this), x);
  Matrix J(X.rows(), q * d);
  for (Eigen::Index k = 0; k < q; ++k) {
    Matrix seed = Matrix::Zero(X.rows(), q);
    seed.col(k).setOnes();
    const Matrix g = ad::grad(out, ad::Var::constant(std::move(seed)), {x})[0].value();
    J.middleCols(k * d, d) = g;
  }
  return J;
}

Network init_glorot(const Architecture& arch, std::uint64_t seed) {
  Network net(arch);
  UniformStream u(seed);
  for (std::size_t l = 0; l <= arch.hidden_layers(); ++l) {
    Matrix& W = net.weight(l);
    const double bound = std::sqrt(6.0 / static_cast<double>(W.rows() + W.cols()));
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = bound * (2.0 * u.next() - 1.0);
  }
  return net;
}

namespace {

ad::Var layer_norm(const ad::Var& h, const ad::Var& gain, const ad::Var& offset) {
  const double inv_s = 1.0 / static_cast<double>(h.cols());
  const ad::Var c = ad::center_rows(h);
  const ad::Var var = ad::scale(ad::row_sum(ad::mul(c, c)), inv_s);
  const ad::Var inv = ad::pow(ad::add_scalar(var, kLayerNormEps), -0.5);
  return ad::row_affine(ad::scale_rows(c, inv), gain, offset);
}

}  // namespace

ad::Var forward(const Architecture& arch, const std::vector<ad::Var>& params, const ad::Var& X) {
  const std::size_t L = arch.hidden_layers();
  if (params.size() != 2 * (L + 1) + 2 * arch.norm_layers())
    throw InvalidArgument("parameter list does not match the architecture");
  if (static_cast<std::size_t>(X.cols()) != arch.input_dim)
    throw InvalidArgument("network input has the wrong dimension");
  ad::Var h = X;
  for (std::size_t l = 0; l < L; ++l) {
    ad::Var a = ad::affine(h, params[2 * l], params[2 * l + 1]);
    const bool norm = arch.layer_norm && l + 1 < L;
    const std::size_t k = 2 * (L + 1) + 2 * l;
    if (norm && arch.norm_before_activation) a = layer_norm(a, params[k], params[k + 1]);
    a = ad::tanh(a);
    if (norm && !arch.norm_before_activation) a = layer_norm(a, params[k], params[k + 1]);
    h = a;
  }
  return ad::affine(h, params[2 * L], params[2 * L + 1]);
}

std::vector<ad::Var> parameter_leaves(const Network& net) {
  std::vector<ad::Var> v;
  v.reserve(net.params().size());
  for (const Matrix& p : net.params()) v.push_back(ad::Var::leaf(p));
  return v;
}

std::vector<ad::Var> parameter_constants(const Network& net) {
  std::vector<ad::Var> v;
  v.reserve(net.params().size());
  for (const Matrix& p : net.params()) v.push_back(ad::Var::constant(p));
  return v;
}

}  // namespace fbsde
