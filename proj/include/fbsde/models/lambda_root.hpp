#pragma once

namespace fbsde {

/// Solves s + arctan(s) = r.
double lambda_root(double r, double tol = 1e-14);

}  // namespace fbsde
