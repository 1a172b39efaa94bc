#pragma once

#include <cstddef>

#include "fbsde/models/fbsde_model.hpp"
#include "fbsde/models/riccati.hpp"

namespace fbsde {

/// Reaction-diffusion problem with ω(t,x) = exp(t + Σx_i); μ = 0, σ = I.
ModelPtr make_example1(std::size_t d = 1, double horizon = 0.5, double lambda = 1.0,
                       double gamma = 0.6);

/// LQG control: μ = 0, σ = √2 I, f = −½|z|², g = xᵀAx + vᵀx + c.
ModelPtr make_example2(std::size_t d, double horizon, const Matrix& A, const Vector& v,
                       double c, std::size_t riccati_steps = 10000);
ModelPtr make_example2(std::size_t d = 1, double horizon = 0.5);

/// State-dependent diagonal diffusion with Gaussian-bump solution.
ModelPtr make_example3(std::size_t d = 1, double horizon = 10.0, double lambda = 10.0,
                       double tau = 1.0);

/// Arithmetic Brownian motion X = x0 + μt + σW with f ≡ 0 and g(x) = a·x.
ModelPtr make_linear_abm(const Vector& x0, const Vector& mu, const Matrix& sigma,
                         const RowVector& a, double horizon);

}  // namespace fbsde
