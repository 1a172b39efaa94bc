#include "fbsde/models/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fbsde/core/errors.hpp"

namespace fbsde {

namespace {

struct State {
  Matrix P;
  Vector Q;
  double R;
};

// Derivatives with respect to the reversed time s = T − t.
State rhs(const State& s) {
  const Matrix S = s.P + s.P.transpose();
  return {-(S * S), -2.0 * S * s.Q, S.trace() - s.Q.squaredNorm()};
}

State axpy(const State& s, double h, const State& k) {
  return {s.P + h * k.P, s.Q + h * k.Q, s.R + h * k.R};
}

bool finite(const State& s) {
  return s.P.allFinite() && s.Q.allFinite() && std::isfinite(s.R);
}

}  // namespace

void RiccatiTable::at(double t, Matrix& p, Vector& q, double& r) const {
  const double pos = std::clamp(t / horizon, 0.0, 1.0) * static_cast<double>(steps);
  auto i = static_cast<std::size_t>(std::floor(pos));
  if (i >= steps) {
    p = P[steps];
    q = Q[steps];
    r = R[steps];
    return;
  }
  const double w = pos - static_cast<double>(i);
  p = (1.0 - w) * P[i] + w * P[i + 1];
  q = (1.0 - w) * Q[i] + w * Q[i + 1];
  r = (1.0 - w) * R[i] + w * R[i + 1];
}

RiccatiTable solve_riccati(const Matrix& A, const Vector& v, double c, double horizon,
                           std::size_t steps) {
  if (steps == 0) throw InvalidArgument("Riccati solve needs at least one step");
  if (A.rows() != A.cols() || A.rows() != v.size())
    throw InvalidArgument("Riccati terminal data has inconsistent dimensions");
  if (!(horizon > 0.0)) throw InvalidArgument("Riccati horizon must be positive");

  RiccatiTable table;
  table.horizon = horizon;
  table.steps = steps;
  table.P.resize(steps + 1);
  table.Q.resize(steps + 1);
  table.R.resize(steps + 1);

  const double h = horizon / static_cast<double>(steps);
  State s{A, v, c};
  table.P[steps] = s.P;
  table.Q[steps] = s.Q;
  table.R[steps] = s.R;
  for (std::size_t i = steps; i-- > 0;) {
    const State k1 = rhs(s);
    const State k2 = rhs(axpy(s, 0.5 * h, k1));
    const State k3 = rhs(axpy(s, 0.5 * h, k2));
    const State k4 = rhs(axpy(s, h, k3));
    s.P += (h / 6.0) * (k1.P + 2.0 * k2.P + 2.0 * k3.P + k4.P);
    s.Q += (h / 6.0) * (k1.Q + 2.0 * k2.Q + 2.0 * k3.Q + k4.Q);
    s.R += (h / 6.0) * (k1.R + 2.0 * k2.R + 2.0 * k3.R + k4.R);
    const double t = horizon * static_cast<double>(i) / static_cast<double>(steps);
    if (!finite(s))
      throw IntegrationFailure("Riccati solution blew up at t=" + std::to_string(t), t);
    table.P[i] = s.P;
    table.Q[i] = s.Q;
    table.R[i] = s.R;
  }
  return table;
}

}  // namespace fbsde
