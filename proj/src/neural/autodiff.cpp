#include "fbsde/neural/autodiff.hpp"

#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "fbsde/core/errors.hpp"

namespace fbsde::ad {

namespace {

thread_local bool g_grad_enabled = true;

Var make(Matrix value, std::vector<Var> parents, BackwardFn backward,
         bool first_order_only = false) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const Var& p : parents) any = any || p.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->first_order_only = first_order_only;
      node->parents.reserve(parents.size());
      for (const Var& p : parents) node->parents.push_back(p.node());
      node->backward = std::move(backward);
    }
  }
  return Var(std::move(node));
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidArgument(std::string("shape mismatch in ") + op);
}

}  // namespace

Var Var::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Var::leaf(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
EnableGradGuard::EnableGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = true; }
EnableGradGuard::~EnableGradGuard() { g_grad_enabled = previous_; }

std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs, bool create_graph) {
  if (!output.defined() || output.rows() != 1 || output.cols() != 1)
    throw InvalidArgument("grad requires a scalar output");
  return grad(output, Var::constant(Matrix::Ones(1, 1)), inputs, create_graph);
}

std::vector<Var> grad(const Var& output, const Var& seed, const std::vector<Var>& inputs,
                      bool create_graph) {
  if (!output.defined()) throw InvalidArgument("grad of an undefined output");
  if (seed.rows() != output.rows() || seed.cols() != output.cols())
    throw InvalidArgument("grad seed shape does not match the output");

  std::unordered_set<const Node*> targets;
  for (const Var& v : inputs) targets.insert(v.node().get());

  // Post-order DFS over the differentiable part of the graph.
  std::vector<Node*> order;
  std::unordered_map<const Node*, char> reaches;
  if (output.requires_grad()) {
    std::vector<std::pair<Node*, std::size_t>> stack{{output.node().get(), 0}};
    std::unordered_set<const Node*> visited{output.node().get()};
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        Node* p = node->parents[next++].get();
        if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
        continue;
      }
      char r = targets.count(node) ? 1 : 0;
      for (const auto& p : node->parents)
        if (p->requires_grad && reaches[p.get()]) r = 1;
      reaches[node] = r;
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_map<const Node*, Var> grads;
  {
    std::unique_ptr<NoGradGuard> off;
    std::unique_ptr<EnableGradGuard> on;
    if (create_graph)
      on = std::make_unique<EnableGradGuard>();
    else
      off = std::make_unique<NoGradGuard>();

    if (output.requires_grad()) grads[output.node().get()] = seed;
    std::vector<char> need;
    std::vector<Var> out;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      auto g = grads.find(node);
      if (g == grads.end() || !node->backward) continue;
      need.assign(node->parents.size(), 0);
      bool any = false;
      for (std::size_t i = 0; i < node->parents.size(); ++i) {
        const Node* p = node->parents[i].get();
        need[i] = p->requires_grad && reaches[p];
        any = any || need[i];
      }
      if (!any) continue;
      if (create_graph && node->first_order_only)
        throw UnsupportedOperation("expression contains a primitive without second derivatives");
      out.assign(node->parents.size(), Var());
      const Var gv = g->second;
      node->backward(gv, need, out);
      for (std::size_t i = 0; i < node->parents.size(); ++i) {
        if (!need[i] || !out[i].defined()) continue;
        const Node* p = node->parents[i].get();
        auto slot = grads.find(p);
        if (slot == grads.end())
          grads.emplace(p, out[i]);
        else
          slot->second = add(slot->second, out[i]);
      }
    }
  }

  std::vector<Var> result;
  result.reserve(inputs.size());
  for (const Var& v : inputs) {
    auto g = grads.find(v.node().get());
    if (g != grads.end())
      result.push_back(g->second);
    else
      result.push_back(Var::constant(Matrix::Zero(v.rows(), v.cols())));
  }
  return result;
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw InvalidArgument("shape mismatch in matmul");
  return make(a.value() * b.value(), {a, b},
              [a, b](const Var& g, const std::vector<char>& need, std::vector<Var>& out) {
                if (need[0]) out[0] = matmul_nt(g, b);
                if (need[1]) out[1] = matmul_tn(a, g);
              });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw InvalidArgument("shape mismatch in matmul_nt");
  return make(a.value() * b.value().transpose(), {a, b},
              [a, b](const Var& g, const std::vector<char>& need, std::vector<Var>& out) {
                if (need[0]) out[0] = matmul(g, b);
                if (need[1]) out[1] = matmul_tn(g, a);
              });
}

Var matmul_tn(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) throw InvalidArgument("shape mismatch in matmul_tn");
  return make(a.value().transpose() * b.value(), {a, b},
              [a, b](const Var& g, const std::vector<char>& need, std::vector<Var>& out) {
                if (need[0]) out[0] = matmul_nt(b, g);
                if (need[1]) out[1] = matmul(a, g);
              });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make(a.value() + b.value(), {a, b},
              [](const Var& g, const std::vector<char>& need, std::vector<Var>& out) {
                if (need[0]) out[0] = g;
                if (need[1]) out[1] = g;
              });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make(a.value() - b.value(), {a, b},
              [](const Var& g, const std::vector<char>& need, std::vector<Var>& out) {
                if (need[0]) out[0] = g;
                if (need[1]) out[1] = neg(g);
              });
}

Var neg(const Var& a) {
  return make(-a.value(), {a}, [](const Var& g, const std::vector<char>&, std::vector<Var>& out) {
    out[0] = neg(g);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  return make(a.value().cwiseProduct(b.value()), {a, b},
              [a, b](const Var& g, const std::vector<char>& need, std::vector<Var>& out) {
                if (need[0]) out[0] = mul(g, b);
                if (need[1]) out[1] = mul(g, a);
              });
}

Var scale(const Var& a, double s) {
  return make(a.value() * s, {a}, [s](const Var& g, const std::vector<char>&, std::vector<Var>& out) {
    out[0] = scale(g, s);
  });
}

Var add_scalar(const Var& a, double s) {
  return make(a.value().array() + s, {a},
              [](const Var& g, const std::vector<char>&, std::vector<Var>& out) { out[0] = g; });
}

Matrix tanh_values(const Matrix& a) {
  // Vectorized exp with an odd Taylor polynomial near 0, where 1 − e^{−2|x|} cancels.
  const auto x = a.array();
  const Eigen::ArrayXXd e = (-2.0 * x.abs()).exp();
  const Eigen::ArrayXXd x2 = x.square();
  const Eigen::ArrayXXd series =
      x * (1.0 + x2 * (-1.0 / 3.0 + x2 * (2.0 / 15.0 - x2 * (17.0 / 315.0))));
  return (x.abs() < 0.01).select(series, x.sign() * (1.0 - e) / (1.0 + e)).matrix();
}

Var tanh(const Var& a) {
  Var y = make(tanh_values(a.value()), {a}, nullptr);
  if (y.node()->requires_grad) {
    std::weak_ptr<Node> self = y.node();
    y.node()->backward = [self](const Var& g, const std::vector<char>&, std::vector<Var>& out) {
      const Var yv(self.lock());
      if (!g_grad_enabled) {
        out[0] = Var::constant(g.value().cwiseProduct(
            (1.0 - yv.value().array().square()).matrix()));
        return;
      }
      // (1 − y²) expressed through differentiable ops.
      out[0] = sub(g, mul(g, mul(yv, yv)));
    };
  }
  return y;
}

Var pow(const Var& a, double p) {
  return make(a.value().array().pow(p).matrix(), {a},
              [a, p](const Var& g, const std::vector<char>&, std::vector<Var>& out) {
                out[0] = mul(g, scale(pow(a, p - 1.0), p));
              });
}

Var affine(const Var& h, const Var& W, const Var& b) {
  if (h.cols() != W.cols() || b.rows() != 1 || b.cols() != W.rows())
    throw InvalidArgument("shape mismatch in affine");
  Matrix v = h.value() * W.value().transpose();
  v.rowwise() += b.value().row(0);
  return make(std::move(v), {h, W, b},
              [h, W](const Var& g, const std::vector<char>& need, std::vector<Var>& out) {
                if (need[0]) out[0] = matmul(g, W);
                if (need[1]) out[1] = matmul_tn(g, h);
                if (need[2]) out[2] = col_sum(g);
              });
}

Var center_rows(const Var& a) {
  Matrix v = a.value();
  v.colwise() -= a.value().rowwise().mean();
  // The map is linear and self-adjoint.
  return make(std::move(v), {a}, [](const Var& g, const std::vector<char>&, std::vector<Var>& out) {
    out[0] = center_rows(g);
  });
}

Var scale_rows(const Var& a, const Var& s) {
  if (s.cols() != 1 || s.rows() != a.rows()) throw InvalidArgument("shape mismatch in scale_rows");
  Matrix v = a.value().array().colwise() * s.value().col(0).array();
  return make(std::move(v), {a, s},
              [a, s](const Var& g, const std::vector<char>& need, std::vector<Var>& out) {
                if (need[0]) out[0] = scale_rows(g, s);
                if (need[1]) out[1] = row_sum(mul(g, a));
              });
}

Var row_affine(const Var& a, const Var& gn, const Var& o) {
  if (gn.rows() != 1 || o.rows() != 1 || gn.cols() != a.cols() || o.cols() != a.cols())
    throw InvalidArgument("shape mismatch in row_affine");
  Matrix v = (a.value().array().rowwise() * gn.value().row(0).array()).rowwise() +
             o.value().row(0).array();
  return make(std::move(v), {a, gn, o},
              [a, gn](const Var& g, const std::vector<char>& need, std::vector<Var>& out) {
                if (need[0]) out[0] = row_affine(g, gn, Var::constant(Matrix::Zero(1, g.cols())));
                if (need[1]) out[1] = col_sum(mul(g, a));
                if (need[2]) out[2] = col_sum(g);
              });
}

Var expand_rows(const Var& a, Eigen::Index rows) {
  if (a.rows() != 1) throw InvalidArgument("expand_rows expects a row vector");
  return make(a.value().replicate(rows, 1), {a},
              [](const Var& g, const std::vector<char>&, std::vector<Var>& out) {
                out[0] = col_sum(g);
              });
}

Var expand_cols(const Var& a, Eigen::Index cols) {
  if (a.cols() != 1) throw InvalidArgument("expand_cols expects a column vector");
  return make(a.value().replicate(1, cols), {a},
              [](const Var& g, const std::vector<char>&, std::vector<Var>& out) {
                out[0] = row_sum(g);
              });
}

Var expand_all(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  if (a.rows() != 1 || a.cols() != 1) throw InvalidArgument("expand_all expects a scalar");
  return make(Matrix::Constant(rows, cols, a.scalar()), {a},
              [](const Var& g, const std::vector<char>&, std::vector<Var>& out) {
                out[0] = sum_all(g);
              });
}

Var row_sum(const Var& a) {
  const Eigen::Index n = a.cols();
  return make(a.value().rowwise().sum(), {a},
              [n](const Var& g, const std::vector<char>&, std::vector<Var>& out) {
                out[0] = expand_cols(g, n);
              });
}

Var col_sum(const Var& a) {
  const Eigen::Index r = a.rows();
  return make(a.value().colwise().sum(), {a},
              [r](const Var& g, const std::vector<char>&, std::vector<Var>& out) {
                out[0] = expand_rows(g, r);
              });
}

Var sum_all(const Var& a) {
  const Eigen::Index r = a.rows(), c = a.cols();
  return make(Matrix::Constant(1, 1, a.value().sum()), {a},
              [r, c](const Var& g, const std::vector<char>&, std::vector<Var>& out) {
                out[0] = expand_all(g, r, c);
              });
}

Var mean_all(const Var& a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(a.rows() * a.cols()));
}

Var col(const Var& a, Eigen::Index j) {
  if (j < 0 || j >= a.cols()) throw InvalidArgument("column index out of range");
  const Eigen::Index n = a.cols();
  return make(a.value().col(j), {a},
              [j, n](const Var& g, const std::vector<char>&, std::vector<Var>& out) {
                out[0] = place_col(g, j, n);
              });
}

Var place_col(const Var& a, Eigen::Index j, Eigen::Index cols) {
  if (a.cols() != 1 || j < 0 || j >= cols) throw InvalidArgument("bad place_col request");
  Matrix v = Matrix::Zero(a.rows(), cols);
  v.col(j) = a.value();
  return make(std::move(v), {a}, [j](const Var& g, const std::vector<char>&, std::vector<Var>& out) {
    out[0] = col(g, j);
  });
}

Var col_block(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 1 || start + count > a.cols())
    throw InvalidArgument("column block out of range");
  const Eigen::Index n = a.cols();
  return make(a.value().middleCols(start, count), {a},
              [start, n](const Var& g, const std::vector<char>&, std::vector<Var>& out) {
                out[0] = place_col_block(g, start, n);
              });
}

Var place_col_block(const Var& a, Eigen::Index start, Eigen::Index cols) {
  const Eigen::Index count = a.cols();
  if (start < 0 || start + count > cols) throw InvalidArgument("bad place_col_block request");
  Matrix v = Matrix::Zero(a.rows(), cols);
  v.middleCols(start, count) = a.value();
  return make(std::move(v), {a},
              [start, count](const Var& g, const std::vector<char>&, std::vector<Var>& out) {
                out[0] = col_block(g, start, count);
              });
}

Var pointwise(const Var& a, const std::function<std::pair<Matrix, Matrix>(const Matrix&)>& fn) {
  auto [value, deriv] = fn(a.value());
  if (value.rows() != a.rows() || value.cols() != a.cols() || deriv.rows() != a.rows() ||
      deriv.cols() != a.cols())
    throw InvalidArgument("pointwise map changed the shape");
  const Var d = Var::constant(std::move(deriv));
  return make(std::move(value), {a},
              [d](const Var& g, const std::vector<char>&, std::vector<Var>& out) {
                out[0] = mul(g, d);
              },
              true);
}

Var driver_op(const Var& y, const Var& z,
              const std::function<RowDriver(const Matrix&, const Matrix&)>& fn) {
  if (y.cols() != 1 || z.rows() != y.rows()) throw InvalidArgument("driver_op shape mismatch");
  RowDriver r = fn(y.value(), z.value());
  if (r.value.rows() != y.rows() || r.value.cols() != 1 || r.dy.rows() != y.rows() ||
      r.dz.rows() != z.rows() || r.dz.cols() != z.cols())
    throw InvalidArgument("driver_op callback returned bad shapes");
  const Var dy = Var::constant(std::move(r.dy));
  const Var dz = Var::constant(std::move(r.dz));
  const Eigen::Index d = z.cols();
  return make(std::move(r.value), {y, z},
              [dy, dz, d](const Var& g, const std::vector<char>& need, std::vector<Var>& out) {
                if (need[0]) out[0] = mul(g, dy);
                if (need[1]) out[1] = mul(expand_cols(g, d), dz);
              },
              true);
}

}  // namespace fbsde::ad
