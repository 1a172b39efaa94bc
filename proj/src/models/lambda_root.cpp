#include "fbsde/models/lambda_root.hpp"

#include <cmath>
#include <numbers>

#include "fbsde/core/errors.hpp"

namespace fbsde {

double lambda_root(double r, double tol) {
  if (!(tol > 0.0)) throw InvalidArgument("lambda_root tolerance must be positive");
  double lo = r - std::numbers::pi / 2.0;
  double hi = r + std::numbers::pi / 2.0;
  double s = r - std::atan(r);
  for (int it = 0; it < 200; ++it) {
    const double F = s + std::atan(s) - r;
    if (std::abs(F) <= tol) return s;
    if (F > 0.0)
      hi = s;
    else
      lo = s;
    const double step = F / (1.0 + 1.0 / (1.0 + s * s));
    double next = s - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == s) return s;
    s = next;
  }
  return s;
}

}  // namespace fbsde
