#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <vector>

#include "fbsde/bcos/cos_expansion.hpp"
#include "fbsde/core/time_grid.hpp"
#include "fbsde/models/fbsde_model.hpp"

namespace fbsde {

struct BcosSettings {
  std::size_t K = 512;
  std::size_t M = 0;  // 0 selects 4K
  std::size_t picard = 5;
  double theta_y = 1.0;
  double L = 10.0;

  std::size_t samples() const { return M == 0 ? 4 * K : M; }
};

struct BcosDiagnostics {
  std::atomic<std::size_t> clamped{0};
};

/// (ŷ_n, ẑ_n, γ̂_n) at one time level of the one-dimensional backward recursion.
///
/// The terminal level returns (g, g′σ, (g′σ)′). Earlier levels hold cosine
/// coefficients of h_{n+1} = ŷ + (1−θ)Δt f, w_{n+1} = (1 + Δt f_y)ẑ/σ + Δt f_x and
/// ∂_z f, all at t_{n+1}, and evaluate the one-step formulas at any x.
class BcosStage {
 public:
  struct Value {
    double y = 0.0;
    double z = 0.0;
    double gamma = 0.0;
  };

  static BcosStage terminal(ModelPtr model, CosInterval iv,
                            std::shared_ptr<BcosDiagnostics> diag = nullptr);

  std::size_t index() const { return n_; }
  double time() const { return t_; }
  bool is_terminal() const { return terminal_; }

  Value operator()(double x) const;
  /// Picard iterates y⁰, y¹, … at x.
  std::vector<double> picard_iterates(double x) const;

  const Vector& h_coeffs() const { return H_; }
  const Vector& w_coeffs() const { return W_; }
  const Vector& fz_coeffs() const { return Fz_; }

 private:
  friend BcosStage bcos_osm_step(std::size_t n, const BcosStage& next, ModelPtr model,
                                 const TimeGrid& grid, const BcosSettings& s);
  BcosStage() = default;

  struct Moments {
    double sigma, eh, ew, jw, kw, efz, jfz;
  };
  Moments moments(double x) const;
  double clamp(double x) const;

  ModelPtr model_;
  CosInterval iv_;
  std::shared_ptr<BcosDiagnostics> diag_;
  std::size_t n_ = 0;
  double t_ = 0.0;
  double dt_ = 0.0;
  double theta_ = 1.0;
  std::size_t picard_ = 5;
  bool terminal_ = true;
  Vector H_, W_, Fz_;
};

/// Stage n from stage n + 1.
BcosStage bcos_osm_step(std::size_t n, const BcosStage& next, ModelPtr model,
                        const TimeGrid& grid, const BcosSettings& s);

struct BcosSolution {
  TimeGrid grid;
  CosInterval interval;
  BcosSettings settings;
  std::vector<BcosStage> stages;  // index n = 0..N
  std::shared_ptr<BcosDiagnostics> diagnostics;

  std::size_t clamped_evaluations() const { return diagnostics->clamped.load(); }
};

BcosSolution bcos_solve(ModelPtr model, const TimeGrid& grid, const BcosSettings& s = {});

}  // namespace fbsde
