#include "fbsde/neural/adam.hpp"

#include <cmath>

#include "fbsde/core/errors.hpp"

namespace fbsde {

AdamState::AdamState(const std::vector<Matrix>& params) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const Matrix& p : params) {
    m.push_back(Matrix::Zero(p.rows(), p.cols()));
    v.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

bool adam_step(AdamState& state, const std::vector<Matrix*>& params,
               const std::vector<Matrix>& grads, double lr, std::string* diagnostic) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw InvalidArgument("adam_step: parameter, gradient and state counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i].rows() || params[i]->cols() != grads[i].cols() ||
        state.m[i].rows() != grads[i].rows() || state.m[i].cols() != grads[i].cols())
      throw InvalidArgument("adam_step: shape mismatch in block " + std::to_string(i));
    if (!grads[i].allFinite()) {
      if (diagnostic) *diagnostic = "non-finite gradient in parameter block " + std::to_string(i);
      return false;
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i].cwiseAbs2();
    params[i]->array() -= lr * (state.m[i].array() / c1) /
                          ((state.v[i].array() / c2).sqrt() + state.eps);
  }
  return true;
}

bool adam_step(AdamState& state, std::vector<Matrix>& params, const std::vector<Matrix>& grads,
               double lr, std::string* diagnostic) {
  std::vector<Matrix*> ptrs;
  ptrs.reserve(params.size());
  for (Matrix& p : params) ptrs.push_back(&p);
  return adam_step(state, ptrs, grads, lr, diagnostic);
}

double LearningRateSchedule::at(std::size_t iter, std::size_t budget) const {
  double lr = base;
  for (double m : milestones)
    if (static_cast<double>(iter) >= m * static_cast<double>(budget)) lr *= factor;
  return lr;
}

}  // namespace fbsde
