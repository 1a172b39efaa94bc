#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "fbsde/core/types.hpp"

namespace fbsde::ad {

class Var;

/// Computes parent gradients from the output gradient; entries left empty are skipped.
using BackwardFn =
    std::function<void(const Var& grad, const std::vector<char>& need, std::vector<Var>& out)>;

struct Node {
  Matrix value;
  bool requires_grad = false;
  bool first_order_only = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
};

/// Reference-counted handle to a matrix-valued node in the expression graph.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Matrix value);
  static Var leaf(Matrix value);

  bool defined() const { return static_cast<bool>(node_); }
  const Matrix& value() const { return node_->value; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Whether new operations record backward edges on this thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class EnableGradGuard {
 public:
  EnableGradGuard();
  ~EnableGradGuard();
  EnableGradGuard(const EnableGradGuard&) = delete;
  EnableGradGuard& operator=(const EnableGradGuard&) = delete;

 private:
  bool previous_;
};

/// Gradients of a scalar output with respect to `inputs`.
///
/// With create_graph the returned gradients are themselves differentiable;
/// otherwise they are detached constants. Unreachable inputs get zero gradients.
std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs, bool create_graph = false);

/// Vector-Jacobian product: gradients of ⟨seed, output⟩.
std::vector<Var> grad(const Var& output, const Var& seed, const std::vector<Var>& inputs,
                      bool create_graph = false);

Var matmul(const Var& a, const Var& b);
/// a · bᵀ
Var matmul_nt(const Var& a, const Var& b);
/// aᵀ · b
Var matmul_tn(const Var& a, const Var& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var neg(const Var& a);
/// Elementwise product.
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var tanh(const Var& a);
/// Elementwise tanh on plain values, shared by graph and fast forward passes.
Matrix tanh_values(const Matrix& a);
/// Elementwise a^p for a constant exponent.
Var pow(const Var& a, double p);

/// h·Wᵀ + 1·b for h: rows×m, W: n×m, b: 1×n.
Var affine(const Var& h, const Var& W, const Var& b);
/// Subtracts each row's mean.
Var center_rows(const Var& a);
/// Row b multiplied by s_b for s: rows×1.
Var scale_rows(const Var& a, const Var& s);
/// a ⊙ 1·g + 1·o for g, o: 1×n.
Var row_affine(const Var& a, const Var& g, const Var& o);

/// 1×n → rows×n.
Var expand_rows(const Var& a, Eigen::Index rows);
/// rows×1 → rows×n.
Var expand_cols(const Var& a, Eigen::Index cols);
/// 1×1 → rows×cols.
Var expand_all(const Var& a, Eigen::Index rows, Eigen::Index cols);

/// rows×n → rows×1.
Var row_sum(const Var& a);
/// rows×n → 1×n.
Var col_sum(const Var& a);
/// rows×n → 1×1.
Var sum_all(const Var& a);
Var mean_all(const Var& a);

/// Column j as rows×1.
Var col(const Var& a, Eigen::Index j);
/// rows×1 placed into column j of a zero rows×n matrix.
Var place_col(const Var& a, Eigen::Index j, Eigen::Index cols);
/// Columns [start, start + count) as rows×count.
Var col_block(const Var& a, Eigen::Index start, Eigen::Index count);
/// rows×count placed at column `start` of a zero rows×cols matrix.
Var place_col_block(const Var& a, Eigen::Index start, Eigen::Index cols);

/// Pointwise map with a supplied first derivative; not twice differentiable.
/// `fn` receives the input value and returns (value, elementwise derivative).
Var pointwise(const Var& a, const std::function<std::pair<Matrix, Matrix>(const Matrix&)>& fn);

/// Row-wise scalar function of (y: rows×1, z: rows×d) with supplied partials.
/// `fn` returns the value (rows×1), ∂_y (rows×1) and ∂_z (rows×d).
struct RowDriver {
  Matrix value;
  Matrix dy;
  Matrix dz;
};
Var driver_op(const Var& y, const Var& z, const std::function<RowDriver(const Matrix&, const Matrix&)>& fn);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

}  // namespace fbsde::ad
