#include "fbsde/deep/stage.hpp"

#include "fbsde/core/errors.hpp"

namespace fbsde {

StageTriple StageTriple::terminal(ModelPtr model, std::size_t n) {
  if (!model) throw InvalidArgument("terminal stage needs a model");
  StageTriple s;
  s.kind_ = Kind::terminal;
  s.n_ = n;
  s.t_ = model->horizon();
  s.model_ = std::move(model);
  return s;
}

StageTriple StageTriple::reference(ModelPtr model, std::size_t n, double t) {
  if (!model) throw InvalidArgument("reference stage needs a model");
  if (!model->has_reference())
    throw UnsupportedOperation("model " + model->name() + " has no reference solution");
  StageTriple s;
  s.kind_ = Kind::reference;
  s.n_ = n;
  s.t_ = t;
  s.model_ = std::move(model);
  return s;
}

StageTriple StageTriple::networks(std::size_t n, Network phi, Network psi,
                                  std::optional<Network> chi) {
  const std::size_t d = psi.architecture().input_dim;
  if (phi.architecture().shape != OutputShape::scalar || phi.architecture().input_dim != d ||
      psi.architecture().shape != OutputShape::row ||
      (chi && (chi->architecture().shape != OutputShape::matrix ||
               chi->architecture().input_dim != d)))
    throw InvalidArgument("stage networks have inconsistent shapes");
  StageTriple s;
  s.kind_ = Kind::network;
  s.n_ = n;
  s.phi_ = std::move(phi);
  s.psi_ = std::move(psi);
  s.chi_ = std::move(chi);
  return s;
}

Vector StageTriple::y(const Matrix& X) const {
  if (kind_ == Kind::network) return phi_->evaluate(X).col(0);
  Vector out(X.rows());
  for (Eigen::Index b = 0; b < X.rows(); ++b) {
    const Vector x = X.row(b).transpose();
    out(b) = kind_ == Kind::terminal ? model_->terminal(x) : model_->reference(t_, x).y;
  }
  return out;
}

Matrix StageTriple::z(const Matrix& X) const {
  if (kind_ == Kind::network) return psi_->evaluate(X);
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index b = 0; b < X.rows(); ++b) {
    const Vector x = X.row(b).transpose();
    out.row(b) = kind_ == Kind::terminal ? model_->terminal_z(x) : model_->reference(t_, x).z;
  }
  return out;
}

Matrix StageTriple::gamma(const Matrix& X) const {
  if (kind_ == Kind::network) return chi_ ? chi_->evaluate(X) : psi_->batch_input_jacobian(X);
  const Eigen::Index d = X.cols();
  Matrix out(X.rows(), d * d);
  for (Eigen::Index b = 0; b < X.rows(); ++b) {
    const Vector x = X.row(b).transpose();
    const Matrix g =
        kind_ == Kind::terminal ? model_->terminal_gamma(x) : model_->reference(t_, x).gamma;
    for (Eigen::Index i = 0; i < d; ++i) out.block(b, i * d, 1, d) = g.row(i);
  }
  return out;
}

double StageTriple::y(const Vector& x) const { return y(Matrix(x.transpose()))(0); }

RowVector StageTriple::z(const Vector& x) const { return z(Matrix(x.transpose())).row(0); }

Matrix StageTriple::gamma(const Vector& x) const {
  const Eigen::Index d = x.size();
  const Matrix row = gamma(Matrix(x.transpose()));
  Matrix g(d, d);
  for (Eigen::Index i = 0; i < d; ++i) g.row(i) = row.block(0, i * d, 1, d);
  return g;
}

StageTriple terminal_stage(ModelPtr model, std::size_t N) {
  return StageTriple::terminal(std::move(model), N);
}

}  // namespace fbsde
