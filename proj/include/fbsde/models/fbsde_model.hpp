#pragma once

#include <memory>
#include <string>

#include "fbsde/core/types.hpp"

namespace fbsde {

/// Exact solution triple (y, z, γ) with γ_ij = ∂_j z_i.
struct ReferenceTriple {
  double y = 0.0;
  RowVector z;
  Matrix gamma;
};

/// Coupled forward-backward SDE
///   dX = μ(t,X)dt + σ(t,X)dW,  X_0 = x0,
///   dY = −f(t,X,Y,Z)dt + Z dW,  Y_T = g(X_T).
class FbsdeModel {
 public:
  virtual ~FbsdeModel() = default;

  virtual std::string name() const = 0;
  std::size_t dim() const { return dim_; }
  double horizon() const { return horizon_; }
  const Vector& x0() const { return x0_; }

  virtual Vector drift(double t, const Vector& x) const = 0;
  virtual Matrix diffusion(double t, const Vector& x) const = 0;
  virtual Matrix diffusion_inv(double t, const Vector& x) const = 0;
  /// (i, j) entry is ∂_j μ_i.
  virtual Matrix drift_jacobian(double t, const Vector& x) const = 0;
  /// Slice k holds ∂_k σ.
  virtual Tensor3 diffusion_jacobian(double t, const Vector& x) const = 0;

  virtual double driver(double t, const Vector& x, double y, const RowVector& z) const = 0;
  virtual RowVector driver_dx(double t, const Vector& x, double y, const RowVector& z) const = 0;
  virtual double driver_dy(double t, const Vector& x, double y, const RowVector& z) const = 0;
  virtual RowVector driver_dz(double t, const Vector& x, double y, const RowVector& z) const = 0;

  virtual double terminal(const Vector& x) const = 0;
  /// ∇g · σ(T, x).
  virtual RowVector terminal_z(const Vector& x) const = 0;
  /// ∇(∇g · σ)(T, x).
  virtual Matrix terminal_gamma(const Vector& x) const = 0;

  /// True when μ and σ do not depend on (t, x).
  virtual bool constant_coefficients() const { return false; }

  virtual bool has_reference() const { return false; }
  virtual ReferenceTriple reference(double t, const Vector& x) const;

  virtual bool has_exact_paths() const { return false; }
  /// X_t as a function of W_t.
  virtual Vector exact_state(double t, const Vector& w) const;
  /// D_s X_t (s ≤ t) as a function of W_t.
  virtual Matrix exact_malliavin(double t, const Vector& w) const;

 protected:
  FbsdeModel(std::size_t dim, double horizon, Vector x0);

 private:
  std::size_t dim_;
  double horizon_;
  Vector x0_;
};

using ModelPtr = std::shared_ptr<const FbsdeModel>;

ReferenceTriple reference_solution(const FbsdeModel& model, double t, const Vector& x);

}  // namespace fbsde
