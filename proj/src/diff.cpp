#include "accudrive/diff.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "accudrive/errors.hpp"
#include "accudrive/kernels.hpp"

namespace accudrive::diff {

const Tensor& Var::value() const { return graph_->value(*this); }

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::leaf(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  return push(std::move(node));
}

Var Graph::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  return push(std::move(node));
}

Var Graph::custom(Tensor value, std::vector<Var> parents, BackwardRule rule) {
  Node node;
  node.value = std::move(value);
  node.parents.reserve(parents.size());
  for (const Var& p : parents) {
    if (p.graph_ != this) throw ArgumentError("operand belongs to a different graph");
    node.parents.push_back(p.id_);
    node.requires_grad = node.requires_grad || nodes_[p.id_].requires_grad;
  }
  if (node.requires_grad) node.rule = std::move(rule);
  return push(std::move(node));
}

const Tensor& Graph::grad(Var v) const {
  const Node& node = nodes_[v.id_];
  if (node.grad.size() != node.value.size()) {
    throw ArgumentError("gradient requested before backward() for node " + std::to_string(v.id_));
  }
  return node.grad;
}

void Graph::backward(Var root) {
  if (root.graph_ != this) throw ArgumentError("backward root belongs to a different graph");
  const Node& r = nodes_[root.id_];
  if (r.value.rows() != 1 || r.value.cols() != 1) {
    throw ArgumentError("backward requires a scalar root, got " + r.value.shape());
  }
  for (Node& node : nodes_) node.grad = Tensor(node.value.rows(), node.value.cols());
  nodes_[root.id_].grad[0] = 1.0;

  std::vector<Tensor*> slots;
  for (std::size_t i = root.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.rule) continue;
    slots.clear();
    for (std::size_t p : node.parents) {
      Node& parent = nodes_[p];
      slots.push_back(parent.requires_grad ? &parent.grad : nullptr);
    }
    node.rule(node.grad, slots);
  }
}

namespace {

Graph& graph_of(Var a) {
  if (!a.valid()) throw ArgumentError("operation on an unbound variable");
  return *a.graph();
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
  }
}

template <class Forward, class Derivative>
Var unary(Var x, Forward f, Derivative df) {
  const Tensor& xv = x.value();
  Tensor out(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return graph_of(x).custom(std::move(out), {x},
                            [x, df](const Tensor& g, std::span<Tensor* const> pg) {
                              if (!pg[0]) return;
                              const Tensor& xv = x.value();
                              Tensor& gx = *pg[0];
                              for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xv[i]);
                            });
}

}  // namespace

Var affine(Var w, Var b, Var x) {
  const Tensor& W = w.value();
  const Tensor& B = b.value();
  const Tensor& X = x.value();
  if (X.cols() != W.cols()) {
    throw DimensionError("affine: weight " + W.shape() + " cannot multiply input " + X.shape());
  }
  if (B.rows() != 1 || B.cols() != W.rows()) {
    throw DimensionError("affine: bias " + B.shape() + " does not match weight " + W.shape());
  }
  const std::size_t n = W.rows();
  Tensor out(X.rows(), n);
  for (std::size_t t = 0; t < X.rows(); ++t) {
    kernels::affine_row(W.values(), B.values(), X.row(t), out.row(t));
  }
  return graph_of(x).custom(
      std::move(out), {w, b, x}, [w, x](const Tensor& g, std::span<Tensor* const> pg) {
        const Tensor& W = w.value();
        const Tensor& X = x.value();
        const std::size_t n = W.rows();
        const std::size_t m = W.cols();
        for (std::size_t t = 0; t < X.rows(); ++t) {
          auto gt = g.row(t);
          auto xt = X.row(t);
          if (pg[0]) {
            Tensor& gw = *pg[0];
            for (std::size_t i = 0; i < n; ++i) {
              const double gi = gt[i];
              if (gi == 0.0) continue;
              double* row = gw.row(i).data();
              for (std::size_t j = 0; j < m; ++j) row[j] += gi * xt[j];
            }
          }
          if (pg[1]) {
            Tensor& gb = *pg[1];
            for (std::size_t i = 0; i < n; ++i) gb[i] += gt[i];
          }
          if (pg[2]) {
            auto gx = pg[2]->row(t);
            for (std::size_t i = 0; i < n; ++i) {
              const double gi = gt[i];
              if (gi == 0.0) continue;
              const double* wi = W.row(i).data();
              for (std::size_t j = 0; j < m; ++j) gx[j] += gi * wi[j];
            }
          }
        }
      });
}

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return graph_of(a).custom(std::move(out), {a, b},
                            [](const Tensor& g, std::span<Tensor* const> pg) {
                              for (Tensor* p : pg) {
                                if (!p) continue;
                                for (std::size_t i = 0; i < g.size(); ++i) (*p)[i] += g[i];
                              }
                            });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return graph_of(a).custom(std::move(out), {a, b},
                            [](const Tensor& g, std::span<Tensor* const> pg) {
                              if (pg[0]) {
                                for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                              }
                              if (pg[1]) {
                                for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] -= g[i];
                              }
                            });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return graph_of(a).custom(std::move(out), {a, b},
                            [a, b](const Tensor& g, std::span<Tensor* const> pg) {
                              const Tensor& av = a.value();
                              const Tensor& bv = b.value();
                              if (pg[0]) {
                                for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * bv[i];
                              }
                              if (pg[1]) {
                                for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] += g[i] * av[i];
                              }
                            });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return graph_of(a).custom(std::move(out), {a},
                            [factor](const Tensor& g, std::span<Tensor* const> pg) {
                              if (!pg[0]) return;
                              for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * factor;
                            });
}

Var scale_shift(Var x, Var bias, Var gain) {
  const Tensor& X = x.value();
  const Tensor& A = bias.value();
  const Tensor& B = gain.value();
  if (A.rows() != 1 || A.cols() != X.cols() || !A.same_shape(B)) {
    throw DimensionError("scale_shift: bias " + A.shape() + " and gain " + B.shape() +
                         " do not match input " + X.shape());
  }
  Tensor out(X.rows(), X.cols());
  for (std::size_t t = 0; t < X.rows(); ++t) {
    for (std::size_t i = 0; i < X.cols(); ++i) out(t, i) = A[i] + B[i] * X(t, i);
  }
  return graph_of(x).custom(
      std::move(out), {x, bias, gain}, [x, gain](const Tensor& g, std::span<Tensor* const> pg) {
        const Tensor& X = x.value();
        const Tensor& B = gain.value();
        for (std::size_t t = 0; t < X.rows(); ++t) {
          for (std::size_t i = 0; i < X.cols(); ++i) {
            const double gi = g(t, i);
            if (pg[0]) (*pg[0])(t, i) += gi * B[i];
            if (pg[1]) (*pg[1])[i] += gi;
            if (pg[2]) (*pg[2])[i] += gi * X(t, i);
          }
        }
      });
}

Var mish(Var x) {
  return unary(x, [](double v) { return kernels::mish(v); },
               [](double v) { return kernels::mish_derivative(v); });
}

Var tanh_act(Var x) {
  return unary(x, [](double v) { return kernels::saturate(v); },
               [](double v) {
                 const double t = std::tanh(v);
                 return 1.0 - t * t;
               });
}

Var softplus(Var x) {
  return unary(x, [](double v) { return kernels::softplus(v); },
               [](double v) { return kernels::sigmoid(v); });
}

Var spike(Var v, double threshold, double alpha) {
  if (!(threshold > 0.0) || !(alpha > 0.0)) {
    throw ArgumentError("spike: threshold and surrogate sharpness must be positive");
  }
  return unary(v, [threshold](double p) { return kernels::heaviside(p, threshold); },
               [threshold, alpha](double p) {
                 return kernels::spike_surrogate(p, threshold, alpha);
               });
}

Var concat_cols(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rows() != B.rows()) {
    throw DimensionError("concat_cols: row counts differ " + A.shape() + " vs " + B.shape());
  }
  const std::size_t n = A.cols();
  const std::size_t m = B.cols();
  Tensor out(A.rows(), n + m);
  for (std::size_t t = 0; t < A.rows(); ++t) {
    for (std::size_t j = 0; j < n; ++j) out(t, j) = A(t, j);
    for (std::size_t j = 0; j < m; ++j) out(t, n + j) = B(t, j);
  }
  return graph_of(a).custom(std::move(out), {a, b},
                            [n, m](const Tensor& g, std::span<Tensor* const> pg) {
                              for (std::size_t t = 0; t < g.rows(); ++t) {
                                if (pg[0]) {
                                  for (std::size_t j = 0; j < n; ++j) (*pg[0])(t, j) += g(t, j);
                                }
                                if (pg[1]) {
                                  for (std::size_t j = 0; j < m; ++j) (*pg[1])(t, j) += g(t, n + j);
                                }
                              }
                            });
}

Var repeat_rows(Var a, std::size_t count) {
  const Tensor& A = a.value();
  if (A.rows() != 1) throw DimensionError("repeat_rows: expected a row vector, got " + A.shape());
  Tensor out(count, A.cols());
  for (std::size_t t = 0; t < count; ++t) {
    for (std::size_t j = 0; j < A.cols(); ++j) out(t, j) = A[j];
  }
  return graph_of(a).custom(std::move(out), {a}, [](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    for (std::size_t t = 0; t < g.rows(); ++t) {
      for (std::size_t j = 0; j < g.cols(); ++j) (*pg[0])[j] += g(t, j);
    }
  });
}

Var select_row(Var a, std::size_t r) {
  const Tensor& A = a.value();
  if (r >= A.rows()) {
    throw DimensionError("select_row: row " + std::to_string(r) + " out of " + A.shape());
  }
  auto src = A.row(r);
  Tensor out(1, A.cols(), std::vector<double>(src.begin(), src.end()));
  return graph_of(a).custom(std::move(out), {a}, [r](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    auto dst = pg[0]->row(r);
    for (std::size_t j = 0; j < g.cols(); ++j) dst[j] += g[j];
  });
}

Var select_col(Var a, std::size_t c) {
  const Tensor& A = a.value();
  if (c >= A.cols()) {
    throw DimensionError("select_col: column " + std::to_string(c) + " out of " + A.shape());
  }
  Tensor out(A.rows(), 1);
  for (std::size_t t = 0; t < A.rows(); ++t) out[t] = A(t, c);
  return graph_of(a).custom(std::move(out), {a}, [c](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    for (std::size_t t = 0; t < g.rows(); ++t) (*pg[0])(t, c) += g[t];
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return graph_of(a).custom(Tensor::scalar(total), {a},
                            [](const Tensor& g, std::span<Tensor* const> pg) {
                              if (!pg[0]) return;
                              for (double& v : pg[0]->values()) v += g[0];
                            });
}

namespace {

// Sum of masked absolute errors divided by divisor, as a single node.
Var masked_abs_node(Var pred, const Tensor& obs, std::span<const double> mask, double divisor) {
  const Tensor& P = pred.value();
  if (P.size() != obs.size() || P.size() != mask.size()) {
    throw DimensionError("masked error: prediction " + P.shape() + ", observation " + obs.shape() +
                         " and mask of length " + std::to_string(mask.size()) +
                         " must have equal lengths");
  }
  double total = 0.0;
  std::vector<double> slope(P.size(), 0.0);
  for (std::size_t i = 0; i < P.size(); ++i) {
    if (mask[i] == 0.0) continue;
    const double d = P[i] - obs[i];
    total += mask[i] * std::abs(d);
    slope[i] = d > 0.0 ? mask[i] : (d < 0.0 ? -mask[i] : 0.0);
  }
  return graph_of(pred).custom(Tensor::scalar(total / divisor), {pred},
                               [slope = std::move(slope), divisor](const Tensor& g,
                                                                   std::span<Tensor* const> pg) {
                                 if (!pg[0]) return;
                                 const double scale = g[0] / divisor;
                                 for (std::size_t i = 0; i < slope.size(); ++i) {
                                   (*pg[0])[i] += scale * slope[i];
                                 }
                               });
}

}  // namespace

Var masked_abs_sum(Var pred, const Tensor& obs, std::span<const double> mask) {
  return masked_abs_node(pred, obs, mask, 1.0);
}

Var masked_mae(Var pred, const Tensor& obs, std::span<const double> mask) {
  double weight = 0.0;
  for (double m : mask) weight += m;
  if (!(weight > 0.0)) throw DegenerateError("masked_mae: mask has no valid entries");
  return masked_abs_node(pred, obs, mask, weight);
}

}  // namespace accudrive::diff
