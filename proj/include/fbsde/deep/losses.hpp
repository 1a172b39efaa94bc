#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fbsde/core/time_grid.hpp"
#include "fbsde/deep/stage.hpp"
#include "fbsde/models/fbsde_model.hpp"
#include "fbsde/neural/autodiff.hpp"

namespace fbsde {

/// Simulated data for the regression at step n: X_n, X_{n+1}, ΔW_n and D_nX_{n+1}.
struct StageBatch {
  std::size_t n = 0;
  double t = 0.0;       // t_n
  double t_next = 0.0;  // t_{n+1}
  double dt = 0.0;
  Matrix X;       // B×d
  Matrix X_next;  // B×d
  Matrix dW;      // B×d
  Matrix DX;      // B×(d·d), row-major D_nX_{n+1}

  std::size_t batch() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(X.cols()); }
};

/// Euler–Maruyama paths up to t_{n+1} from increments seeded by `seed`.
StageBatch make_stage_batch(const FbsdeModel& model, const TimeGrid& grid, std::size_t n,
                            std::size_t batch, std::uint64_t seed);

/// D_nŶ_{n+1} = Ẑ_{n+1} σ⁻¹(t_{n+1}, X_{n+1}) D_nX_{n+1}, row by row.
Matrix dy_estimate(const Matrix& z_next, const FbsdeModel& model, double t_next,
                   const Matrix& X_next, const Matrix& DX);

/// Stage n+1 quantities along a batch, computed once per SGD iteration.
struct NextStageData {
  Vector y;      // Ŷ_{n+1}
  Matrix z;      // Ẑ_{n+1}
  Matrix dy;     // D_nŶ_{n+1}
  Vector f;      // f(t_{n+1}, X̂_{n+1})
  Vector f_y;
  Matrix f_x;    // B×d
  Matrix f_z;    // B×d
};

NextStageData next_stage_data(const FbsdeModel& model, const StageBatch& batch,
                              const StageTriple& next);

/// σ(t_n, X_n) for right-multiplying B×d row blocks.
struct SigmaRows {
  bool constant = false;
  Matrix sigma;              // used when constant
  std::vector<Matrix> rows;  // rows[k](b, :) = σ(t_n, X_n(b))(k, :)

  static SigmaRows at(const FbsdeModel& model, double t, const Matrix& X);
  Matrix apply(const Matrix& A) const;
  ad::Var apply(const ad::Var& A) const;
};

/// Fixed parts of the Z/Γ residual
///   T − ψ(X_n) + v·χ(X_n)·σ(t_n, X_n),
/// with T = (1 + Δt f_y) D_nŶ_{n+1} + Δt f_x D_nX_{n+1} and v = Δt f_z − ΔWᵀ.
struct ZLossInputs {
  Matrix target;  // T, B×d
  Matrix v;       // B×d
  SigmaRows sigma;
};

ZLossInputs z_loss_inputs(const FbsdeModel& model, const StageBatch& batch,
                          const NextStageData& next);

/// Euler-scheme counterpart of the z target: ΔWᵀ Ŷ_{n+1} / Δt.
Matrix euler_z_target(const StageBatch& batch, const Vector& y_next);

/// Empirical loss with parametrized Γ; psi_out is B×d, chi_out is B×(d·d).
ad::Var loss_zgamma(const ZLossInputs& in, const ad::Var& psi_out, const ad::Var& chi_out);
/// Empirical loss with Γ taken as ∇_xψ, formed through the vector-Jacobian
/// product ∇_x⟨v, ψ⟩; `X` must be the leaf that produced psi_out.
ad::Var loss_zd(const ZLossInputs& in, const ad::Var& psi_out, const ad::Var& X);

/// Fixed parts of the Y residual
///   Ŷ_{n+1} + (1−θ)Δt f_{n+1} − Ẑ_nΔW_n − φ(X_n) + θΔt f(t_n, X_n, φ(X_n), Ẑ_n).
struct YLossInputs {
  const FbsdeModel* model = nullptr;
  double t = 0.0;
  double dt = 0.0;
  double theta = 1.0;
  Matrix X;     // X_n
  Matrix z;     // Ẑ_n
  Matrix base;  // Ŷ_{n+1} + (1−θ)Δt f_{n+1} − Ẑ_nΔW_n, B×1
};

YLossInputs y_loss_inputs(const FbsdeModel& model, const StageBatch& batch,
                          const NextStageData& next, const Matrix& z_n, double theta);

ad::Var loss_y(const YLossInputs& in, const ad::Var& phi_out);

/// Euler (DBDP1) joint loss
///   Ŷ_{n+1} − φ(X_n) + Δt f(t_n, X_n, φ, ψ) − ψ(X_n)ΔW_n.
ad::Var loss_dbdp1(const FbsdeModel& model, const StageBatch& batch, const Vector& y_next,
                   const ad::Var& phi_out, const ad::Var& psi_out);

/// Scalar conveniences on frozen networks.
double loss_zgamma(const StageBatch& batch, const Network& psi, const Network& chi,
                   const FbsdeModel& model, const StageTriple& next);
double loss_zd(const StageBatch& batch, const Network& psi, const FbsdeModel& model,
               const StageTriple& next);
double loss_y(const StageBatch& batch, const Network& phi, const FbsdeModel& model,
              const StageTriple& next, const Matrix& z_n, double theta);

}  // namespace fbsde
