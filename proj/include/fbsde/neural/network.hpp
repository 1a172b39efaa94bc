#pragma once

#include <cstdint>
#include <vector>

#include "fbsde/core/types.hpp"
#include "fbsde/neural/autodiff.hpp"

namespace fbsde {

enum class OutputShape { scalar, row, matrix };

/// Feedforward layout: L hidden tanh layers, identity output.
///
/// Hidden block l < L is  A_l → tanh → norm  (or A_l → norm → tanh when
/// `norm_before_activation`), the last hidden block is A_L → tanh, then A_{L+1}.
struct Architecture {
  std::size_t input_dim = 1;
  OutputShape shape = OutputShape::scalar;
  std::vector<std::size_t> widths;
  bool layer_norm = true;
  bool norm_before_activation = false;

  std::size_t out_rows() const;
  std::size_t out_cols() const;
  /// Number of flattened outputs q.
  std::size_t output_size() const { return out_rows() * out_cols(); }
  std::size_t hidden_layers() const { return widths.size(); }
  std::size_t norm_layers() const { return layer_norm ? widths.size() - 1 : 0; }
  void validate() const;

  /// L hidden layers of width 100 + d.
  static Architecture standard(std::size_t d, OutputShape shape, std::size_t layers = 2);
};

bool operator==(const Architecture& a, const Architecture& b);

inline constexpr double kLayerNormEps = 1e-6;

/// Parameters stored as matrices in a fixed order:
/// (W_1, b_1, …, W_{L+1}, b_{L+1}, gain_1, offset_1, …, gain_{L−1}, offset_{L−1}).
/// W_l is S_l × S_{l−1}; biases, gains and offsets are 1 × S_l.
class Network {
 public:
  Network() = default;
  explicit Network(Architecture arch);

  const Architecture& architecture() const { return arch_; }
  std::vector<Matrix>& params() { return params_; }
  const std::vector<Matrix>& params() const { return params_; }

  Matrix& weight(std::size_t l) { return params_[2 * l]; }
  const Matrix& weight(std::size_t l) const { return params_[2 * l]; }
  Matrix& bias(std::size_t l) { return params_[2 * l + 1]; }
  const Matrix& bias(std::size_t l) const { return params_[2 * l + 1]; }
  Matrix& gain(std::size_t k) { return params_[norm_index(k)]; }
  const Matrix& gain(std::size_t k) const { return params_[norm_index(k)]; }
  Matrix& offset(std::size_t k) { return params_[norm_index(k) + 1]; }
  const Matrix& offset(std::size_t k) const { return params_[norm_index(k) + 1]; }

  std::size_t parameter_count() const;
  Vector flatten() const;
  void assign(const Vector& flat);
  bool finite() const;

  /// Batch forward pass without graph recording: X is B×d, result B×q.
  Matrix evaluate(const Matrix& X) const;
  /// Output at a single point, shaped out_rows × out_cols.
  Matrix operator()(const Vector& x) const;

  /// ∂ output_k / ∂ x_j as a q×d matrix.
  Matrix input_jacobian(const Vector& x) const;
  /// Jacobians for a batch: B × (q·d), row b holds sample b's q×d Jacobian row-major.
  Matrix batch_input_jacobian(const Matrix& X) const;

 private:
  std::size_t norm_index(std::size_t k) const { return 2 * (arch_.hidden_layers() + 1) + 2 * k; }

  Architecture arch_;
  std::vector<Matrix> params_;
};

/// Glorot-uniform weights, zero biases, unit gains, zero offsets.
Network init_glorot(const Architecture& arch, std::uint64_t seed);

/// Differentiable forward pass: X is B×d, result B×q.
/// `params` follows Network::params() order.
ad::Var forward(const Architecture& arch, const std::vector<ad::Var>& params, const ad::Var& X);

/// One leaf per parameter matrix.
std::vector<ad::Var> parameter_leaves(const Network& net);
/// Parameters as graph constants.
std::vector<ad::Var> parameter_constants(const Network& net);

}  // namespace fbsde
