#pragma once

// Reverse-mode differentiation over dense double matrices.
//
// A Graph is a tape: nodes are appended in evaluation order, which is a valid
// topological order, and backward() walks it once in reverse. Rows of a
// matrix operand are treated as independent samples (timesteps), so the same
// op serves a single vector ([1 x n]) and a whole trip ([T x n]).

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "accudrive/tensor.hpp"

namespace accudrive::diff {

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Graph* graph() const { return graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Receives the node's accumulated gradient and one slot per parent; a slot is
// null when that parent does not require a gradient.
using BackwardRule = std::function<void(const Tensor& grad, std::span<Tensor* const> parent_grads)>;

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Differentiable input.
  Var leaf(Tensor value);
  // Input that never receives a gradient.
  Var constant(Tensor value);
  // Node computed from parents; rule runs during backward.
  Var custom(Tensor value, std::vector<Var> parents, BackwardRule rule);

  const Tensor& value(Var v) const { return nodes_[v.id_].value; }
  // Gradient after backward(); zeros for nodes the root does not depend on.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }

  // Fills every node's gradient with the partial derivative of root. Root must
  // be a [1 x 1] node. Calling again recomputes from scratch.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardRule rule;
    bool requires_grad = false;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
};

// ---- operations ---------------------------------------------------------

// X W^T + b, row by row. W [n x m], b [1 x n], X [T x m] -> [T x n].
Var affine(Var w, Var b, Var x);

Var add(Var a, Var b);
Var sub(Var a, Var b);
// Elementwise product of equal shapes.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// bias + gain * x per row; bias and gain are [1 x n], x is [T x n].
Var scale_shift(Var x, Var bias, Var gain);

Var mish(Var x);
Var tanh_act(Var x);
Var softplus(Var x);

// Heaviside forward at threshold; backward through the sigmoid-derivative
// surrogate alpha * s * (1 - s), s = sigmoid(alpha * (v - threshold)).
Var spike(Var v, double threshold, double alpha);

// [T x n] | [T x m] -> [T x (n + m)].
Var concat_cols(Var a, Var b);
// [1 x n] -> [count x n].
Var repeat_rows(Var a, std::size_t count);
// Row r of a matrix as [1 x n].
Var select_row(Var a, std::size_t r);
// Column c of a matrix as [T x 1].
Var select_col(Var a, std::size_t c);

Var sum(Var a);

// sum_i mask_i * |pred_i - obs_i| over the flattened arrays; entries with a
// zero mask are skipped entirely. The subgradient of |.| at 0 is 0.
Var masked_abs_sum(Var pred, const Tensor& obs, std::span<const double> mask);
// masked_abs_sum / sum(mask). Throws DegenerateError for an all-zero mask.
Var masked_mae(Var pred, const Tensor& obs, std::span<const double> mask);

}  // namespace accudrive::diff
