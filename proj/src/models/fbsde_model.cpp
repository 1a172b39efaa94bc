#include "fbsde/models/fbsde_model.hpp"

#include "fbsde/core/errors.hpp"

namespace fbsde {

FbsdeModel::FbsdeModel(std::size_t dim, double horizon, Vector x0)
    : dim_(dim), horizon_(horizon), x0_(std::move(x0)) {
  if (dim == 0) throw InvalidArgument("model dimension must be positive");
  if (!(horizon > 0.0)) throw InvalidArgument("model horizon must be positive");
  if (static_cast<std::size_t>(x0_.size()) != dim)
    throw InvalidArgument("initial state has the wrong dimension");
}

ReferenceTriple FbsdeModel::reference(double, const Vector&) const {
  throw UnsupportedOperation(name() + " has no reference solution");
}

Vector FbsdeModel::exact_state(double, const Vector&) const {
  throw UnsupportedOperation(name() + " has no exact forward paths");
}

Matrix FbsdeModel::exact_malliavin(double, const Vector&) const {
  throw UnsupportedOperation(name() + " has no exact forward paths");
}

ReferenceTriple reference_solution(const FbsdeModel& model, double t, const Vector& x) {
  if (!model.has_reference()) throw UnsupportedOperation(model.name() + " has no reference solution");
  if (t < 0.0 || t > model.horizon() * (1.0 + 1e-12))
    throw InvalidArgument("reference time outside [0, T]");
  return model.reference(t, x);
}

}  // namespace fbsde
