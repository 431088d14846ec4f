#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "certiprob/tensor.hpp"

namespace certiprob {

using NodeId = std::size_t;

class Tape;

/// Receives the adjoint of the node's output and accumulates into its inputs'
/// adjoints through Tape::grad_acc.
using BackwardFn = std::function<void(const Tensor& out_grad, Tape& tape)>;

/// Append-only record of primitive operations for reverse-mode autodiff.
///
/// Node ids are issued in creation order, so inputs always precede their
/// consumers. A tape built with `record = false` keeps only values, which is
/// what plain inference uses. A tape is single-threaded; give each worker
/// its own.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  NodeId leaf(Tensor value, bool requires_grad = true);

  /// Add a computed node. `backward` is dropped when not recording or when no
  /// input requires a gradient.
  NodeId push(Tensor value, std::vector<NodeId> inputs, BackwardFn backward);

  const Tensor& value(NodeId id) const;
  bool requires_grad(NodeId id) const;

  /// Adjoint of a node after backward(); zeros if the node was not reached.
  Tensor grad(NodeId id) const;

  /// Adjoint accumulator for use inside backward functions. Returns nullptr
  /// for nodes that do not require a gradient.
  Tensor* grad_acc(NodeId id);

  /// Reverse sweep from a single-element node. Each node is visited once, in
  /// strict reverse creation order.
  void backward(NodeId root);

 private:
  struct Node {
    Tensor value;
    std::vector<NodeId> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  void check(NodeId id) const;

  bool record_;
  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

/// Differentiable primitives. Every op validates shapes and throws
/// ErrorCode::kShapeMismatch on violation.
namespace ops {

/// x[B,in] * w[out,in]^T + b[out]
NodeId dense(Tape& t, NodeId x, NodeId w, NodeId b);
/// Valid-padding, stride-1 convolution. x[B,C,H,W], w[O,C,k,k], b[O].
NodeId conv2d(Tape& t, NodeId x, NodeId w, NodeId b);
NodeId relu(Tape& t, NodeId x);
/// 2x2 max pooling, stride 2, on [B,C,H,W]; odd trailing rows/cols dropped.
NodeId maxpool2(Tape& t, NodeId x);
NodeId reshape(Tape& t, NodeId x, Shape shape);
/// Per-row softmax cross-entropy: logits[B,C] -> [B].
NodeId cross_entropy(Tape& t, NodeId logits, std::span<const int> labels);

NodeId add(Tape& t, NodeId a, NodeId b);
NodeId mul(Tape& t, NodeId a, NodeId b);
NodeId scale(Tape& t, NodeId a, double c);
NodeId sum(Tape& t, NodeId a);
NodeId mean(Tape& t, NodeId a);
/// Means of consecutive groups of `group` elements: [m*group] -> [m].
NodeId group_mean(Tape& t, NodeId a, std::size_t group);

}  // namespace ops
}  // namespace certiprob
