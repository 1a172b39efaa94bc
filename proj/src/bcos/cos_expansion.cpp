#include "fbsde/bcos/cos_expansion.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>

#include "fbsde/core/errors.hpp"

namespace fbsde {

namespace {

using Plan = std::shared_ptr<const Matrix>;

// K×M matrix of cos(kπ(j + ½)/M).
Plan dct_plan(std::size_t K, std::size_t M) {
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, std::size_t>, Plan> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find({K, M});
  if (it != cache.end()) return it->second;
  auto C = std::make_shared<Matrix>(K, M);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < M; ++j)
      (*C)(k, j) = std::cos(std::numbers::pi * static_cast<double>(k) *
                            (static_cast<double>(j) + 0.5) / static_cast<double>(M));
  if (cache.size() > 8) cache.clear();
  cache[{K, M}] = C;
  return C;
}

}  // namespace

CosInterval make_cos_interval(const FbsdeModel& model, double L) {
  if (model.dim() != 1) throw InvalidArgument("cosine interval requires a one-dimensional model");
  const Vector x0 = model.x0();
  const double T = model.horizon();
  const double km = model.drift(0.0, x0)[0] * T;
  const double ks = model.diffusion(0.0, x0)(0, 0) * T;
  if (!(ks > 0.0)) throw InvalidArgument("cosine interval requires positive diffusion at x0");
  return {x0[0] + km - L * std::sqrt(ks), x0[0] + km + L * std::sqrt(ks)};
}

std::vector<double> cos_midpoints(const CosInterval& iv, std::size_t M) {
  std::vector<double> x(M);
  const double h = iv.width() / static_cast<double>(M);
  for (std::size_t j = 0; j < M; ++j) x[j] = iv.a + (static_cast<double>(j) + 0.5) * h;
  return x;
}

double CosExpansion::operator()(double x) const {
  const double theta = std::numbers::pi * (x - interval.a) / interval.width();
  double s = 0.5 * coeffs[0];
  for (Eigen::Index k = 1; k < coeffs.size(); ++k)
    s += coeffs[k] * std::cos(static_cast<double>(k) * theta);
  return s;
}

CosExpansion dct_coeffs(const std::vector<double>& fvals, const CosInterval& iv, std::size_t K,
                        std::size_t M) {
  if (K == 0) throw InvalidArgument("DCT needs at least one coefficient");
  if (M < K) throw InvalidArgument("DCT requires M >= K");
  if (fvals.size() != M) throw InvalidArgument("DCT sample count does not match M");
  if (!(iv.b > iv.a)) throw InvalidArgument("cosine interval must satisfy a < b");
  const Plan C = dct_plan(K, M);
  const Eigen::Map<const Vector> f(fvals.data(), static_cast<Eigen::Index>(M));
  return {iv, (*C * f) * (2.0 / static_cast<double>(M))};
}

Transition euler_transition(const FbsdeModel& model, double t, double x, double dt) {
  const Vector xv = Vector::Constant(1, x);
  return {model.drift(t, xv)[0], model.diffusion(t, xv)(0, 0), dt};
}

std::complex<double> char_factor(std::size_t k, double x, const Transition& tr,
                                 const CosInterval& iv) {
  const double u = static_cast<double>(k) * std::numbers::pi / iv.width();
  const double damp = std::exp(-0.5 * u * u * tr.sigma * tr.sigma * tr.dt);
  return std::polar(damp, u * (tr.mu * tr.dt + x - iv.a));
}

std::complex<double> char_factor(std::size_t k, double x, const FbsdeModel& model, double t,
                                 double dt, const CosInterval& iv) {
  return char_factor(k, x, euler_transition(model, t, x, dt), iv);
}

CosKernel::CosKernel(std::size_t K, const CosInterval& iv)
    : K_(K), iv_(iv), u_(K), re_(K), im_(K), sq_(K) {
  for (std::size_t k = 0; k < K; ++k)
    u_[k] = static_cast<double>(k) * std::numbers::pi / iv.width();
}

void CosKernel::evaluate(double x, const Transition& tr) {
  tr_ = tr;
  const double du = std::numbers::pi / iv_.width();
  const double c = 0.5 * du * du * tr.sigma * tr.sigma * tr.dt;
  const std::complex<double> step = std::polar(1.0, du * (tr.mu * tr.dt + x - iv_.a));
  const double e2 = std::exp(-2.0 * c);
  std::complex<double> phase(1.0, 0.0);
  double damp = 1.0;
  double ratio = std::exp(-c);
  std::size_t k = 0;
  for (; k < K_; ++k) {
    if ((k & 31u) == 0 && k > 0)
      phase = std::polar(1.0, static_cast<double>(k) * du * (tr.mu * tr.dt + x - iv_.a));
    const double r = damp * phase.real();
    const double i = damp * phase.imag();
    re_[k] = r;
    im_[k] = -u_[k] * i;
    sq_[k] = u_[k] * u_[k] * r;
    damp *= ratio;
    ratio *= e2;
    phase *= step;
    if (damp < 1e-300) {
      ++k;
      break;
    }
  }
  for (; k < K_; ++k) re_[k] = im_[k] = sq_[k] = 0.0;
  re_[0] *= 0.5;
  im_[0] *= 0.5;
}

double CosKernel::moment(const Vector& V, int order) const {
  switch (order) {
    case 0:
      return expect(V);
    case 1:
      return expect_dw(V);
    case 2:
      return expect_dw2(V);
    default:
      throw InvalidArgument("cosine moment order must be 0, 1 or 2");
  }
}

double cos_expectation(const CosExpansion& v, double x, const Transition& tr, int order) {
  CosKernel kernel(v.size(), v.interval);
  kernel.evaluate(x, tr);
  return kernel.moment(v.coeffs, order);
}

double cos_expectation(const CosExpansion& v, double x, const FbsdeModel& model, double t,
                       double dt, int order) {
  return cos_expectation(v, x, euler_transition(model, t, x, dt), order);
}

}  // namespace fbsde
