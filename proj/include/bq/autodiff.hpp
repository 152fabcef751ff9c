#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bq/tensor.hpp"

namespace bq {

using NodeId = int32_t;

enum class OpKind {
  kLeaf,
  kConstant,
  kAdd,
  kAddRow,
  kHadamard,
  kMatMul,
  kSigmoid,
  kTanh,
  kConcatCols,
  kAffine,
  kSum,
  kCustom,
};

// Reverse-mode autodiff over a dynamic graph. Nodes are appended in forward
// order, so the arena index order is already topological. Tensor values are
// immutable once a node is created; backward() accumulates into a parallel
// grad arena. The graph is rebuilt from scratch every training step.
class Graph {
 public:
  // backward rule: given this node's grad, accumulate into input grads.
  using BackwardFn = std::function<void(Graph&, NodeId)>;

  NodeId leaf(Tensor value);
  NodeId constant(Tensor value);

  NodeId add(NodeId a, NodeId b);
  // mat (m x n) + row (1 x n or length-n vector) broadcast over rows.
  NodeId add_rowvec(NodeId mat, NodeId row);
  NodeId hadamard(NodeId a, NodeId b);
  NodeId matmul(NodeId a, NodeId b);
  NodeId sigmoid(NodeId a);
  NodeId tanh(NodeId a);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId affine(NodeId a, double scale, double shift);
  NodeId sum(NodeId a);

  // Node with caller-supplied forward value and backward rule (STE wrappers,
  // equalization, gradient quantizers).
  NodeId custom(Tensor value, std::vector<NodeId> inputs, BackwardFn backward,
                const std::string& label = "custom");

  // Populates grads of every node reachable from root. Root must be scalar.
  void backward(NodeId root);

  const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Tensor& grad(NodeId id) const;
  bool has_grad(NodeId id) const { return !grads_[static_cast<size_t>(id)].shape().empty(); }
  OpKind kind(NodeId id) const { return nodes_[static_cast<size_t>(id)].kind; }
  const std::vector<NodeId>& inputs(NodeId id) const {
    return nodes_[static_cast<size_t>(id)].inputs;
  }
  int64_t node_count() const { return static_cast<int64_t>(nodes_.size()); }

  // Adds g into the grad accumulator of id (allocating zeros on first touch).
  void accumulate_grad(NodeId id, const Tensor& g);

 private:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    Tensor value;
    BackwardFn backward;
    std::string label;
  };

  NodeId push(Node n);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

// Finite-difference gradient of f at x (central differences, step eps).
// Test oracle quality; lives here because gradient checks are part of the
// engine's contract.
Tensor numeric_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps = 1e-5);

}  // namespace bq
