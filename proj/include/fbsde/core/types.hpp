#pragma once

#include <Eigen/Dense>
#include <vector>

namespace fbsde {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;

/// Third-order tensor stored as d slices; slice k holds the d×d matrix ∂_k σ.
using Tensor3 = std::vector<Matrix>;

}  // namespace fbsde
