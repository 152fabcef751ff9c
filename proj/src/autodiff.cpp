#include "bq/autodiff.hpp"

#include <cmath>

namespace bq {

NodeId Graph::push(Node n) {
  if (!n.value.all_finite())
    throw DivergenceError("non-finite value produced by op '" + n.label + "'");
  nodes_.push_back(std::move(n));
  grads_.emplace_back();
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::leaf(Tensor value) { return push({OpKind::kLeaf, {}, std::move(value), nullptr, "leaf"}); }

NodeId Graph::constant(Tensor value) {
  return push({OpKind::kConstant, {}, std::move(value), nullptr, "constant"});
}

const Tensor& Graph::grad(NodeId id) const {
  const Tensor& g = grads_[static_cast<size_t>(id)];
  if (g.shape().empty()) throw ContractError("gradient not populated; call backward() first");
  return g;
}

void Graph::accumulate_grad(NodeId id, const Tensor& g) {
  Tensor& acc = grads_[static_cast<size_t>(id)];
  if (acc.shape().empty()) acc = Tensor(nodes_[static_cast<size_t>(id)].value.shape());
  if (!acc.same_shape(g)) throw DimError("gradient shape mismatch");
  auto a = acc.data();
  auto b = g.data();
  for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

NodeId Graph::add(NodeId a, NodeId b) {
  Tensor v = bq::add(value(a), value(b));
  return push({OpKind::kAdd,
               {a, b},
               std::move(v),
               [a, b](Graph& g, NodeId self) {
                 g.accumulate_grad(a, g.grad(self));
                 g.accumulate_grad(b, g.grad(self));
               },
               "add"});
}

NodeId Graph::add_rowvec(NodeId mat, NodeId row) {
  const Tensor& m = value(mat);
  const Tensor& r = value(row);
  if (r.rows() != 1 || r.cols() != m.cols()) throw DimError("add_rowvec: row extent mismatch");
  Tensor v = m;
  for (int64_t i = 0; i < v.rows(); ++i)
    for (int64_t j = 0; j < v.cols(); ++j) v(i, j) += r[j];
  return push({OpKind::kAddRow,
               {mat, row},
               std::move(v),
               [mat, row](Graph& g, NodeId self) {
                 const Tensor& go = g.grad(self);
                 g.accumulate_grad(mat, go);
                 Tensor gr(g.value(row).shape());
                 for (int64_t i = 0; i < go.rows(); ++i)
                   for (int64_t j = 0; j < go.cols(); ++j) gr[j] += go(i, j);
                 g.accumulate_grad(row, gr);
               },
               "add_rowvec"});
}

NodeId Graph::hadamard(NodeId a, NodeId b) {
  Tensor v = bq::hadamard(value(a), value(b));
  return push({OpKind::kHadamard,
               {a, b},
               std::move(v),
               [a, b](Graph& g, NodeId self) {
                 const Tensor& go = g.grad(self);
                 g.accumulate_grad(a, bq::hadamard(go, g.value(b)));
                 g.accumulate_grad(b, bq::hadamard(go, g.value(a)));
               },
               "hadamard"});
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  Tensor v = bq::matmul(value(a), value(b));
  return push({OpKind::kMatMul,
               {a, b},
               std::move(v),
               [a, b](Graph& g, NodeId self) {
                 const Tensor& go = g.grad(self);
                 g.accumulate_grad(a, bq::matmul(go, transpose(g.value(b))));
                 g.accumulate_grad(b, bq::matmul(transpose(g.value(a)), go));
               },
               "matmul"});
}

NodeId Graph::sigmoid(NodeId a) {
  Tensor v = bq::sigmoid(value(a));
  return push({OpKind::kSigmoid,
               {a},
               std::move(v),
               [a](Graph& g, NodeId self) {
                 const Tensor& y = g.value(self);
                 Tensor gi = g.grad(self);
                 auto d = gi.data();
                 auto yd = y.data();
                 for (size_t i = 0; i < d.size(); ++i) d[i] *= yd[i] * (1.0 - yd[i]);
                 g.accumulate_grad(a, gi);
               },
               "sigmoid"});
}

NodeId Graph::tanh(NodeId a) {
  Tensor v = bq::tanh_t(value(a));
  return push({OpKind::kTanh,
               {a},
               std::move(v),
               [a](Graph& g, NodeId self) {
                 const Tensor& y = g.value(self);
                 Tensor gi = g.grad(self);
                 auto d = gi.data();
                 auto yd = y.data();
                 for (size_t i = 0; i < d.size(); ++i) d[i] *= 1.0 - yd[i] * yd[i];
                 g.accumulate_grad(a, gi);
               },
               "tanh"});
}

NodeId Graph::concat_cols(NodeId a, NodeId b) {
  Tensor v = bq::concat_cols(value(a), value(b));
  return push({OpKind::kConcatCols,
               {a, b},
               std::move(v),
               [a, b](Graph& g, NodeId self) {
                 const Tensor& go = g.grad(self);
                 const int64_t ca = g.value(a).cols();
                 const int64_t cb = g.value(b).cols();
                 Tensor ga(g.value(a).shape());
                 Tensor gb(g.value(b).shape());
                 for (int64_t i = 0; i < go.rows(); ++i) {
                   for (int64_t j = 0; j < ca; ++j) ga[i * ca + j] = go(i, j);
                   for (int64_t j = 0; j < cb; ++j) gb[i * cb + j] = go(i, ca + j);
                 }
                 g.accumulate_grad(a, ga);
                 g.accumulate_grad(b, gb);
               },
               "concat_cols"});
}

NodeId Graph::affine(NodeId a, double scale, double shift) {
  Tensor v = bq::affine(value(a), scale, shift);
  return push({OpKind::kAffine,
               {a},
               std::move(v),
               [a, scale](Graph& g, NodeId self) {
                 g.accumulate_grad(a, bq::affine(g.grad(self), scale, 0.0));
               },
               "affine"});
}

NodeId Graph::sum(NodeId a) {
  Tensor v = Tensor::scalar(bq::sum(value(a)));
  return push({OpKind::kSum,
               {a},
               std::move(v),
               [a](Graph& g, NodeId self) {
                 const double go = g.grad(self)[0];
                 Tensor ga(g.value(a).shape());
                 for (double& x : ga.data()) x = go;
                 g.accumulate_grad(a, ga);
               },
               "sum"});
}

NodeId Graph::custom(Tensor value, std::vector<NodeId> inputs, BackwardFn backward,
                     const std::string& label) {
  return push({OpKind::kCustom, std::move(inputs), std::move(value), std::move(backward), label});
}

void Graph::backward(NodeId root) {
  const Tensor& rv = value(root);
  if (rv.size() != 1) throw ContractError("backward root must be scalar-valued");
  accumulate_grad(root, Tensor::scalar(1.0));
  // Arena order is a topological order; walk it in reverse from the root.
  for (NodeId id = root; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.backward) continue;
    if (grads_[static_cast<size_t>(id)].shape().empty()) continue;  // unreachable from root
    n.backward(*this, id);
  }
}

Tensor numeric_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps) {
  Tensor g(x.shape());
  Tensor xp = x;
  for (int64_t i = 0; i < x.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + eps;
    const double fp = f(xp);
    xp[i] = orig - eps;
    const double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

}  // namespace bq
