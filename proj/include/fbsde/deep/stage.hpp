#pragma once

#include <cstddef>
#include <optional>

#include "fbsde/models/fbsde_model.hpp"
#include "fbsde/neural/network.hpp"

namespace fbsde {

/// Evaluators (ŷ_n, ẑ_n, γ̂_n) at one time level, applied to a B×d batch of states.
///
/// z returns B×d; gamma returns B×(d·d) with row b holding γ̂_n(x_b) row-major,
/// entry (i, j) = ∂_j z_i.
class StageTriple {
 public:
  enum class Kind { terminal, reference, network };

  /// (g, ∇g σ, ∇(∇g σ)) at t_N.
  static StageTriple terminal(ModelPtr model, std::size_t n);
  /// The model's exact solution at time t.
  static StageTriple reference(ModelPtr model, std::size_t n, double t);
  /// Trained networks; γ̂ is χ when given, otherwise the input Jacobian of ψ.
  static StageTriple networks(std::size_t n, Network phi, Network psi,
                              std::optional<Network> chi = std::nullopt);

  Kind kind() const { return kind_; }
  std::size_t index() const { return n_; }

  Vector y(const Matrix& X) const;
  Matrix z(const Matrix& X) const;
  Matrix gamma(const Matrix& X) const;

  double y(const Vector& x) const;
  RowVector z(const Vector& x) const;
  Matrix gamma(const Vector& x) const;

  const Network& phi() const { return *phi_; }
  const Network& psi() const { return *psi_; }
  bool has_chi() const { return chi_.has_value(); }
  const Network& chi() const { return *chi_; }

 private:
  StageTriple() = default;

  Kind kind_ = Kind::terminal;
  std::size_t n_ = 0;
  double t_ = 0.0;
  ModelPtr model_;
  std::optional<Network> phi_, psi_, chi_;
};

/// Exact terminal evaluators; alias of StageTriple::terminal.
StageTriple terminal_stage(ModelPtr model, std::size_t N);

}  // namespace fbsde
