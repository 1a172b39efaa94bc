#include "fbsde/models/examples.hpp"

#include <cmath>

#include "fbsde/core/errors.hpp"
#include "fbsde/models/lambda_root.hpp"

namespace fbsde {

namespace {

Tensor3 zero_tensor(std::size_t d) { return Tensor3(d, Matrix::Zero(d, d)); }

class Example1 final : public FbsdeModel {
 public:
  Example1(std::size_t d, double T, double lambda, double gamma)
      : FbsdeModel(d, T, Vector::Ones(d)), lambda_(lambda), gamma_(gamma) {
    if (lambda == 0.0) throw InvalidArgument("example1 requires lambda != 0");
  }

  std::string name() const override { return "example1"; }

  Vector drift(double, const Vector&) const override { return Vector::Zero(dim()); }
  Matrix diffusion(double, const Vector&) const override { return Matrix::Identity(dim(), dim()); }
  Matrix diffusion_inv(double, const Vector&) const override {
    return Matrix::Identity(dim(), dim());
  }
  Matrix drift_jacobian(double, const Vector&) const override { return Matrix::Zero(dim(), dim()); }
  Tensor3 diffusion_jacobian(double, const Vector&) const override { return zero_tensor(dim()); }

  double driver(double t, const Vector& x, double y, const RowVector&) const override {
    const double w = omega(t, x);
    return w / ((1.0 + w) * (1.0 + w)) * bracket(y);
  }
  RowVector driver_dx(double t, const Vector& x, double y, const RowVector&) const override {
    const double w = omega(t, x);
    const double dA = w * (1.0 - w) / std::pow(1.0 + w, 3);
    return RowVector::Constant(dim(), lambda_ * dA * bracket(y));
  }
  double driver_dy(double t, const Vector& x, double, const RowVector&) const override {
    const double w = omega(t, x);
    return w / ((1.0 + w) * (1.0 + w)) * lambda_ * lambda_ * static_cast<double>(dim());
  }
  RowVector driver_dz(double, const Vector&, double, const RowVector&) const override {
    return RowVector::Zero(dim());
  }

  double terminal(const Vector& x) const override { return value(horizon(), x).y; }
  RowVector terminal_z(const Vector& x) const override { return value(horizon(), x).z; }
  Matrix terminal_gamma(const Vector& x) const override { return value(horizon(), x).gamma; }

  bool constant_coefficients() const override { return true; }
  bool has_reference() const override { return true; }
  ReferenceTriple reference(double t, const Vector& x) const override { return value(t, x); }

  bool has_exact_paths() const override { return true; }
  Vector exact_state(double, const Vector& w) const override { return x0() + w; }
  Matrix exact_malliavin(double, const Vector&) const override {
    return Matrix::Identity(dim(), dim());
  }

 private:
  double omega(double t, const Vector& x) const { return std::exp(t + lambda_ * x.sum()); }
  double bracket(double y) const {
    const double l2d = lambda_ * lambda_ * static_cast<double>(dim());
    return l2d * (y - gamma_) - 1.0 - 0.5 * l2d;
  }
  ReferenceTriple value(double t, const Vector& x) const {
    const double w = omega(t, x);
    ReferenceTriple r;
    r.y = gamma_ + w / (1.0 + w);
    r.z = RowVector::Constant(dim(), lambda_ * w / ((1.0 + w) * (1.0 + w)));
    r.gamma = Matrix::Constant(dim(), dim(), lambda_ * lambda_ * w * (1.0 - w) / std::pow(1.0 + w, 3));
    return r;
  }

  double lambda_;
  double gamma_;
};

class Example2 final : public FbsdeModel {
 public:
  Example2(std::size_t d, double T, const Matrix& A, const Vector& v, double c, std::size_t steps)
      : FbsdeModel(d, T, Vector::Ones(d)), A_(A), v_(v), c_(c) {
    if (static_cast<std::size_t>(A.rows()) != d || static_cast<std::size_t>(A.cols()) != d ||
        static_cast<std::size_t>(v.size()) != d)
      throw InvalidArgument("example2 terminal data does not match dimension d");
    table_ = solve_riccati(A, v, c, T, steps);
  }

  std::string name() const override { return "example2"; }

  Vector drift(double, const Vector&) const override { return Vector::Zero(dim()); }
  Matrix diffusion(double, const Vector&) const override {
    return std::sqrt(2.0) * Matrix::Identity(dim(), dim());
  }
  Matrix diffusion_inv(double, const Vector&) const override {
    return Matrix::Identity(dim(), dim()) / std::sqrt(2.0);
  }
  Matrix drift_jacobian(double, const Vector&) const override { return Matrix::Zero(dim(), dim()); }
  Tensor3 diffusion_jacobian(double, const Vector&) const override { return zero_tensor(dim()); }

  double driver(double, const Vector&, double, const RowVector& z) const override {
    return -0.5 * z.squaredNorm();
  }
  RowVector driver_dx(double, const Vector&, double, const RowVector&) const override {
    return RowVector::Zero(dim());
  }
  double driver_dy(double, const Vector&, double, const RowVector&) const override { return 0.0; }
  RowVector driver_dz(double, const Vector&, double, const RowVector& z) const override {
    return -z;
  }

  double terminal(const Vector& x) const override { return x.dot(A_ * x) + v_.dot(x) + c_; }
  RowVector terminal_z(const Vector& x) const override {
    return std::sqrt(2.0) * ((A_ + A_.transpose()) * x + v_).transpose();
  }
  Matrix terminal_gamma(const Vector&) const override {
    return std::sqrt(2.0) * (A_ + A_.transpose());
  }

  bool constant_coefficients() const override { return true; }
  bool has_reference() const override { return true; }
  ReferenceTriple reference(double t, const Vector& x) const override {
    Matrix P;
    Vector Q;
    double R = 0.0;
    table_.at(t, P, Q, R);
    const Matrix S = P + P.transpose();
    ReferenceTriple r;
    r.y = x.dot(P * x) + Q.dot(x) + R;
    r.z = std::sqrt(2.0) * (S * x + Q).transpose();
    r.gamma = std::sqrt(2.0) * S;
    return r;
  }

  bool has_exact_paths() const override { return true; }
  Vector exact_state(double, const Vector& w) const override { return x0() + std::sqrt(2.0) * w; }
  Matrix exact_malliavin(double, const Vector&) const override {
    return std::sqrt(2.0) * Matrix::Identity(dim(), dim());
  }

 private:
  Matrix A_;
  Vector v_;
  double c_;
  RiccatiTable table_;
};

class Example3 final : public FbsdeModel {
 public:
  Example3(std::size_t d, double T, double lambda, double tau)
      : FbsdeModel(d, T, Vector::Ones(d)), lambda_(lambda), tau_(tau) {
    if (!(lambda > 0.0) || !(tau > 0.0))
      throw InvalidArgument("example3 requires lambda > 0 and tau > 0");
  }

  std::string name() const override { return "example3"; }

  Vector drift(double, const Vector& x) const override {
    return x.unaryExpr([](double v) { return mu(v); });
  }
  Matrix diffusion(double, const Vector& x) const override {
    return x.unaryExpr([](double v) { return sig(v); }).asDiagonal();
  }
  Matrix diffusion_inv(double, const Vector& x) const override {
    return x.unaryExpr([](double v) { return 1.0 / sig(v); }).asDiagonal();
  }
  Matrix drift_jacobian(double, const Vector& x) const override {
    return x.unaryExpr([](double v) { return dmu(v); }).asDiagonal();
  }
  Tensor3 diffusion_jacobian(double, const Vector& x) const override {
    Tensor3 out = zero_tensor(dim());
    for (std::size_t k = 0; k < dim(); ++k) out[k](k, k) = dsig(x[k]);
    return out;
  }

  double driver(double t, const Vector& x, double y, const RowVector& z) const override {
    const Parts p = parts(t, x, y, z);
    return p.E / p.s * p.S + p.root * p.lin;
  }
  RowVector driver_dx(double t, const Vector& x, double y, const RowVector& z) const override {
    const Parts p = parts(t, x, y, z);
    RowVector g(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
      const double xi = x[i];
      const double q = 2.0 + xi * xi;
      const double b = sig(xi) * sig(xi);
      const double db = 2.0 * sig(xi) * dsig(xi);
      const double dS = da(xi) + db * (1.0 - 2.0 * xi * xi / p.s) - 4.0 * b * xi / p.s -
                        2.0 * xi / (t + tau_);
      const double bump = p.E / p.s * (-2.0 * xi * p.S / p.s + dS);
      const double droot = -2.0 * xi * p.E * p.E / (p.s * p.root * p.D);
      const double dlin = z[i] * (2.0 - 3.0 * xi * xi) / (q * q * q);
      g[i] = bump + droot * p.lin + p.root * dlin;
    }
    return g;
  }
  double driver_dy(double t, const Vector& x, double y, const RowVector& z) const override {
    const Parts p = parts(t, x, y, z);
    return p.lin * y * (p.D - 2.0 * p.Nn) / (p.root * p.D * p.D);
  }
  RowVector driver_dz(double t, const Vector& x, double y, const RowVector& z) const override {
    const Parts p = parts(t, x, y, z);
    RowVector g(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
      const double q = 2.0 + x[i] * x[i];
      g[i] = p.root * x[i] / (q * q);
    }
    return g;
  }

  double terminal(const Vector& x) const override { return value(horizon(), x).y; }
  RowVector terminal_z(const Vector& x) const override { return value(horizon(), x).z; }
  Matrix terminal_gamma(const Vector& x) const override { return value(horizon(), x).gamma; }

  bool has_reference() const override { return true; }
  ReferenceTriple reference(double t, const Vector& x) const override { return value(t, x); }

  bool has_exact_paths() const override { return true; }
  Vector exact_state(double, const Vector& w) const override {
    Vector out(dim());
    for (std::size_t i = 0; i < dim(); ++i)
      out[i] = lambda_root(x0()[i] + std::atan(x0()[i]) + w[i]);
    return out;
  }
  Matrix exact_malliavin(double t, const Vector& w) const override {
    return diffusion(t, exact_state(t, w));
  }

  static double mu(double x) {
    const double q = 2.0 + x * x;
    return x * (1.0 + x * x) / (q * q * q);
  }
  static double dmu(double x) {
    const double q = 2.0 + x * x;
    return (2.0 + x * x - 3.0 * x * x * x * x) / (q * q * q * q);
  }
  static double sig(double x) { return (1.0 + x * x) / (2.0 + x * x); }
  static double dsig(double x) {
    const double q = 2.0 + x * x;
    return 2.0 * x / (q * q);
  }

 private:
  struct Parts {
    double s, E, S, Nn, D, root, lin;
  };

  static double a(double x) {
    const double q = 2.0 + x * x;
    return 4.0 * x * x * (1.0 + x * x) / (q * q * q);
  }
  static double da(double x) {
    const double q = 2.0 + x * x;
    return 8.0 * x * (2.0 + 2.0 * x * x - x * x * x * x) / (q * q * q * q);
  }

  Parts parts(double t, const Vector& x, double y, const RowVector& z) const {
    Parts p{};
    p.s = lambda_ * (t + tau_);
    p.E = std::exp(-x.squaredNorm() / p.s);
    p.S = 0.0;
    p.lin = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) {
      const double xi = x[i];
      const double b = sig(xi) * sig(xi);
      p.S += a(xi) + b * (1.0 - 2.0 * xi * xi / p.s) - xi * xi / (t + tau_);
      const double q = 2.0 + xi * xi;
      p.lin += z[i] * xi / (q * q);
    }
    p.Nn = 1.0 + y * y + p.E * p.E;
    p.D = 1.0 + 2.0 * y * y;
    p.root = std::sqrt(p.Nn / p.D);
    return p;
  }

  ReferenceTriple value(double t, const Vector& x) const {
    const double s = lambda_ * (t + tau_);
    const double y = std::exp(-x.squaredNorm() / s);
    ReferenceTriple r;
    r.y = y;
    r.z.resize(dim());
    r.gamma.resize(dim(), dim());
    for (std::size_t i = 0; i < dim(); ++i) {
      r.z[i] = -2.0 * x[i] / s * y * sig(x[i]);
      for (std::size_t j = 0; j < dim(); ++j) {
        const double diag = i == j ? sig(x[i]) + x[i] * dsig(x[i]) : 0.0;
        r.gamma(i, j) = -2.0 * y / s * (diag - 2.0 * x[i] * x[j] * sig(x[i]) / s);
      }
    }
    return r;
  }

  double lambda_;
  double tau_;
};

class LinearAbm final : public FbsdeModel {
 public:
  LinearAbm(const Vector& x0, const Vector& mu, const Matrix& sigma, const RowVector& a, double T)
      : FbsdeModel(static_cast<std::size_t>(x0.size()), T, x0), mu_(mu), sigma_(sigma), a_(a) {
    const auto d = x0.size();
    if (mu.size() != d || sigma.rows() != d || sigma.cols() != d || a.size() != d)
      throw InvalidArgument("linear ABM data has inconsistent dimensions");
    Eigen::FullPivLU<Matrix> lu(sigma);
    if (!lu.isInvertible()) throw InvalidArgument("linear ABM diffusion must be invertible");
    sigma_inv_ = lu.inverse();
  }

  std::string name() const override { return "linear_abm"; }

  Vector drift(double, const Vector&) const override { return mu_; }
  Matrix diffusion(double, const Vector&) const override { return sigma_; }
  Matrix diffusion_inv(double, const Vector&) const override { return sigma_inv_; }
  Matrix drift_jacobian(double, const Vector&) const override { return Matrix::Zero(dim(), dim()); }
  Tensor3 diffusion_jacobian(double, const Vector&) const override { return zero_tensor(dim()); }

  double driver(double, const Vector&, double, const RowVector&) const override { return 0.0; }
  RowVector driver_dx(double, const Vector&, double, const RowVector&) const override {
    return RowVector::Zero(dim());
  }
  double driver_dy(double, const Vector&, double, const RowVector&) const override { return 0.0; }
  RowVector driver_dz(double, const Vector&, double, const RowVector&) const override {
    return RowVector::Zero(dim());
  }

  double terminal(const Vector& x) const override { return a_.dot(x.transpose()); }
  RowVector terminal_z(const Vector&) const override { return a_ * sigma_; }
  Matrix terminal_gamma(const Vector&) const override { return Matrix::Zero(dim(), dim()); }

  bool constant_coefficients() const override { return true; }
  bool has_reference() const override { return true; }
  ReferenceTriple reference(double t, const Vector& x) const override {
    ReferenceTriple r;
    r.y = a_.dot((x + mu_ * (horizon() - t)).transpose());
    r.z = a_ * sigma_;
    r.gamma = Matrix::Zero(dim(), dim());
    return r;
  }

  bool has_exact_paths() const override { return true; }
  Vector exact_state(double t, const Vector& w) const override {
    return x0() + mu_ * t + sigma_ * w;
  }
  Matrix exact_malliavin(double, const Vector&) const override { return sigma_; }

 private:
  Vector mu_;
  Matrix sigma_;
  Matrix sigma_inv_;
  RowVector a_;
};

}  // namespace

ModelPtr make_example1(std::size_t d, double horizon, double lambda, double gamma) {
  return std::make_shared<Example1>(d, horizon, lambda, gamma);
}

ModelPtr make_example2(std::size_t d, double horizon, const Matrix& A, const Vector& v, double c,
                       std::size_t riccati_steps) {
  return std::make_shared<Example2>(d, horizon, A, v, c, riccati_steps);
}

ModelPtr make_example2(std::size_t d, double horizon) {
  return make_example2(d, horizon, Matrix::Identity(d, d), Vector::Zero(d), 0.0);
}

ModelPtr make_example3(std::size_t d, double horizon, double lambda, double tau) {
  return std::make_shared<Example3>(d, horizon, lambda, tau);
}

ModelPtr make_linear_abm(const Vector& x0, const Vector& mu, const Matrix& sigma,
                         const RowVector& a, double horizon) {
  return std::make_shared<LinearAbm>(x0, mu, sigma, a, horizon);
}

}  // namespace fbsde
