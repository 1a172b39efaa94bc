#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "fbsde/core/types.hpp"
#include "fbsde/models/fbsde_model.hpp"

namespace fbsde {

struct CosInterval {
  double a = 0.0;
  double b = 1.0;
  double width() const { return b - a; }
};

/// [x0 + κ_μ − L√κ_σ, x0 + κ_μ + L√κ_σ] with κ_μ = μ(0,x0)T, κ_σ = σ(0,x0)T.
CosInterval make_cos_interval(const FbsdeModel& model, double L = 10.0);

/// Midpoints a + (j + ½)(b − a)/M.
std::vector<double> cos_midpoints(const CosInterval& iv, std::size_t M);

/// Σ′ V_k cos(kπ(x − a)/(b − a)); the k = 0 term is halved.
struct CosExpansion {
  CosInterval interval;
  Vector coeffs;

  std::size_t size() const { return static_cast<std::size_t>(coeffs.size()); }
  double operator()(double x) const;
};

/// Type-II DCT of midpoint samples, scaled by 2/M, truncated to K terms.
CosExpansion dct_coeffs(const std::vector<double>& fvals, const CosInterval& iv, std::size_t K,
                        std::size_t M);

/// One Euler step X' = x + μΔt + σΔW.
struct Transition {
  double mu = 0.0;
  double sigma = 1.0;
  double dt = 0.0;
};

Transition euler_transition(const FbsdeModel& model, double t, double x, double dt);

/// φ(u|x) e^{ikπ(x−a)/(b−a)} with φ(u|x) = exp(iuμΔt − ½u²σ²Δt), u = kπ/(b−a).
std::complex<double> char_factor(std::size_t k, double x, const Transition& tr,
                                 const CosInterval& iv);
std::complex<double> char_factor(std::size_t k, double x, const FbsdeModel& model, double t,
                                 double dt, const CosInterval& iv);

/// Tabulated characteristic factors at one x, reused across coefficient vectors.
///
/// re_k = w_k Re Φ, im_k = −w_k u_k Im Φ, sq_k = u_k² Re Φ, with w_0 = ½.
class CosKernel {
 public:
  CosKernel(std::size_t K, const CosInterval& iv);
  void evaluate(double x, const Transition& tr);

  /// E[v(X')].
  double expect(const Vector& V) const { return V.dot(re_); }
  /// E[v(X') ΔW].
  double expect_dw(const Vector& V) const { return tr_.dt * tr_.sigma * V.dot(im_); }
  /// E[v(X') ΔW²].
  double expect_dw2(const Vector& V) const {
    return tr_.dt * V.dot(re_) - tr_.dt * tr_.dt * tr_.sigma * tr_.sigma * V.dot(sq_);
  }
  double moment(const Vector& V, int order) const;

 private:
  std::size_t K_;
  CosInterval iv_;
  Transition tr_;
  Vector u_;
  Vector re_;
  Vector im_;
  Vector sq_;
};

/// E[v(X_{n+1}) ΔW^order | X_n = x] under the Euler transition; order ∈ {0, 1, 2}.
double cos_expectation(const CosExpansion& v, double x, const Transition& tr, int order);
double cos_expectation(const CosExpansion& v, double x, const FbsdeModel& model, double t,
                       double dt, int order);

}  // namespace fbsde
