#include "fbsde/bcos/bcos_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fbsde/core/errors.hpp"

namespace fbsde {

namespace {

CosKernel& kernel_for(std::size_t K, const CosInterval& iv) {
  thread_local std::unique_ptr<CosKernel> kernel;
  thread_local std::size_t k_cached = 0;
  thread_local CosInterval iv_cached{};
  if (!kernel || k_cached != K || iv_cached.a != iv.a || iv_cached.b != iv.b) {
    kernel = std::make_unique<CosKernel>(K, iv);
    k_cached = K;
    iv_cached = iv;
  }
  return *kernel;
}

Vector vec1(double x) { return Vector::Constant(1, x); }
RowVector row1(double z) { return RowVector::Constant(1, z); }

}  // namespace

BcosStage BcosStage::terminal(ModelPtr model, CosInterval iv,
                              std::shared_ptr<BcosDiagnostics> diag) {
  BcosStage s;
  s.model_ = std::move(model);
  s.iv_ = iv;
  s.diag_ = diag ? std::move(diag) : std::make_shared<BcosDiagnostics>();
  s.t_ = s.model_->horizon();
  s.terminal_ = true;
  return s;
}

double BcosStage::clamp(double x) const {
  if (x < iv_.a || x > iv_.b) {
    diag_->clamped.fetch_add(1, std::memory_order_relaxed);
    return std::clamp(x, iv_.a, iv_.b);
  }
  return x;
}

BcosStage::Moments BcosStage::moments(double x) const {
  const Transition tr = euler_transition(*model_, t_, x, dt_);
  CosKernel& k = kernel_for(static_cast<std::size_t>(H_.size()), iv_);
  k.evaluate(x, tr);
  return {tr.sigma,      k.expect(H_),    k.expect(W_),      k.expect_dw(W_),
          k.expect_dw2(W_), k.expect(Fz_), k.expect_dw(Fz_)};
}

BcosStage::Value BcosStage::operator()(double x) const {
  if (terminal_) {
    const Vector xv = vec1(x);
    return {model_->terminal(xv), model_->terminal_z(xv)[0], model_->terminal_gamma(xv)(0, 0)};
  }
  x = clamp(x);
  const Moments m = moments(x);
  const Vector xv = vec1(x);
  const double dmu = model_->drift_jacobian(t_, xv)(0, 0);
  const double dsig = model_->constant_coefficients() ? 0.0 : model_->diffusion_jacobian(t_, xv)[0](0, 0);
  const double den = 1.0 - m.jfz;
  if (std::abs(den) < 1e-10)
    throw SingularStep("singular implicit step at n=" + std::to_string(n_) +
                       ", x=" + std::to_string(x));
  const double a = m.sigma * (1.0 + dmu * dt_);
  const double b = m.sigma * dsig;
  const double dz = (a * m.jw + b * m.kw) / (dt_ * den);

  Value v;
  v.gamma = dz / m.sigma;
  v.z = a * m.ew + b * m.jw + dt_ * dz * m.efz;
  v.y = m.eh;
  if (theta_ > 0.0) {
    const RowVector z = row1(v.z);
    for (std::size_t p = 0; p < picard_; ++p) {
      const double next = theta_ * dt_ * model_->driver(t_, xv, v.y, z) + m.eh;
      const double change = std::abs(next - v.y);
      v.y = next;
      if (change < 1e-12) break;
    }
  }
  return v;
}

std::vector<double> BcosStage::picard_iterates(double x) const {
  if (terminal_) return {(*this)(x).y};
  x = clamp(x);
  const Moments m = moments(x);
  const Value v = (*this)(x);
  const Vector xv = vec1(x);
  const RowVector z = row1(v.z);
  std::vector<double> it{m.eh};
  for (std::size_t p = 0; p < picard_; ++p)
    it.push_back(theta_ * dt_ * model_->driver(t_, xv, it.back(), z) + m.eh);
  return it;
}

BcosStage bcos_osm_step(std::size_t n, const BcosStage& next, ModelPtr model,
                        const TimeGrid& grid, const BcosSettings& s) {
  if (model->dim() != 1) throw InvalidArgument("BCOS supports one-dimensional models only");
  if (n >= grid.steps()) throw InvalidArgument("BCOS step index outside the grid");
  if (s.theta_y < 0.0 || s.theta_y > 1.0) throw InvalidArgument("theta_y must lie in [0, 1]");
  const std::size_t K = s.K;
  const std::size_t M = s.samples();
  const CosInterval iv = next.iv_;
  const double t1 = grid.time(n + 1);
  const double dt = grid.dt(n);

  const std::vector<double> xs = cos_midpoints(iv, M);
  std::vector<double> h(M), w(M), fz(M);
  for (std::size_t j = 0; j < M; ++j) {
    const BcosStage::Value v = next(xs[j]);
    const Vector x = vec1(xs[j]);
    const RowVector z = row1(v.z);
    const double f = model->driver(t1, x, v.y, z);
    const double fy = model->driver_dy(t1, x, v.y, z);
    const double fx = model->driver_dx(t1, x, v.y, z)[0];
    const double sig = model->diffusion(t1, x)(0, 0);
    h[j] = v.y + (1.0 - s.theta_y) * dt * f;
    w[j] = (1.0 + dt * fy) * v.z / sig + dt * fx;
    fz[j] = model->driver_dz(t1, x, v.y, z)[0];
  }

  BcosStage stage;
  stage.model_ = model;
  stage.iv_ = iv;
  stage.diag_ = next.diag_;
  stage.n_ = n;
  stage.t_ = grid.time(n);
  stage.dt_ = dt;
  stage.theta_ = s.theta_y;
  stage.picard_ = s.picard;
  stage.terminal_ = false;
  stage.H_ = dct_coeffs(h, iv, K, M).coeffs;
  stage.W_ = dct_coeffs(w, iv, K, M).coeffs;
  stage.Fz_ = dct_coeffs(fz, iv, K, M).coeffs;

  if (stage.Fz_.cwiseAbs().maxCoeff() > 0.0) {
    for (std::size_t j = 0; j < M; ++j) {
      const auto m = stage.moments(xs[j]);
      if (std::abs(1.0 - m.jfz) < 1e-10)
        throw SingularStep("singular implicit step at n=" + std::to_string(n) +
                           ", x=" + std::to_string(xs[j]));
    }
  }
  return stage;
}

BcosSolution bcos_solve(ModelPtr model, const TimeGrid& grid, const BcosSettings& s) {
  if (model->dim() != 1) throw InvalidArgument("BCOS supports one-dimensional models only");
  if (s.K == 0 || s.samples() < s.K) throw InvalidArgument("BCOS requires K >= 1 and M >= K");
  auto diag = std::make_shared<BcosDiagnostics>();
  const CosInterval iv = make_cos_interval(*model, s.L);
  BcosSolution sol{grid, iv, s, {}, diag};
  std::vector<BcosStage> rev;
  rev.reserve(grid.steps() + 1);
  rev.push_back(BcosStage::terminal(model, iv, diag));
  for (std::size_t n = grid.steps(); n-- > 0;) {
    try {
      rev.push_back(bcos_osm_step(n, rev.back(), model, grid, s));
    } catch (const SingularStep& e) {
      throw SingularStep(std::string("BCOS step ") + std::to_string(n) + ": " + e.what());
    }
  }
  sol.stages.assign(rev.rbegin(), rev.rend());
  return sol;
}

}  // namespace fbsde
