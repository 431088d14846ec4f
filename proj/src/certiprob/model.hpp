#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "certiprob/tape.hpp"
#include "certiprob/tensor.hpp"

namespace certiprob {

enum class LayerKind { kDense, kConv2d, kRelu, kMaxPool2, kFlatten };

struct Layer {
  LayerKind kind = LayerKind::kRelu;
  std::size_t in = 0;      // dense: input width; conv2d: input channels
  std::size_t out = 0;     // dense: output width; conv2d: output channels
  std::size_t kernel = 0;  // conv2d only

  static Layer dense(std::size_t in, std::size_t out) { return {LayerKind::kDense, in, out, 0}; }
  static Layer conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t k) {
    return {LayerKind::kConv2d, in_ch, out_ch, k};
  }
  static Layer relu() { return {LayerKind::kRelu}; }
  static Layer maxpool2() { return {LayerKind::kMaxPool2}; }
  static Layer flatten() { return {LayerKind::kFlatten}; }

  bool has_params() const { return kind == LayerKind::kDense || kind == LayerKind::kConv2d; }

  friend bool operator==(const Layer&, const Layer&) = default;
};

std::string layer_kind_name(LayerKind kind);

/// Declarative layer stack. `input_shape` excludes the batch axis.
struct ModelSpec {
  Shape input_shape;
  std::vector<Layer> layers;
  std::size_t class_count = 0;

  /// Throws kShapeMismatch naming the first layer whose shape does not compose.
  void validate() const;

  /// Shapes of every parameter tensor, in layer order (weight then bias).
  std::vector<Shape> parameter_shapes() const;

  /// Canonical JSON (sorted keys, no whitespace).
  std::string to_json() const;
  static ModelSpec from_json(const std::string& text);

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// flatten -> dense(in, h1) -> relu -> ... -> dense(h_last, classes)
ModelSpec mlp_spec(Shape input_shape, std::span<const std::size_t> hidden, std::size_t classes);

/// conv(c->16,3) relu pool conv(16->32,3) relu pool flatten dense(->128) relu dense(->classes)
ModelSpec convnet_small_spec(std::size_t channels, std::size_t height, std::size_t width, std::size_t classes);

struct Parameters {
  std::vector<Tensor> tensors;

  std::size_t count() const { return tensors.size(); }
  friend bool operator==(const Parameters&, const Parameters&) = default;
};

/// Zero-filled parameters matching `spec`.
Parameters zeros_like(const ModelSpec& spec);

/// Weights ~ N(0, 2/fan_in); biases zero. Deterministic in `seed`.
Parameters he_init(const ModelSpec& spec, std::uint64_t seed);

/// Throws unless params match the parameter shapes of `spec`.
void check_parameters(const ModelSpec& spec, const Parameters& params);

/// Parameters placed on a tape as gradient-carrying leaves.
std::vector<NodeId> bind_parameters(Tape& tape, const Parameters& params, bool requires_grad = true);

/// Records the forward pass of `input` (shape [B, ...input_shape]) and
/// returns the logits node ([B, C]).
NodeId forward_on_tape(Tape& tape, const ModelSpec& spec, std::span<const NodeId> param_nodes, NodeId input);

/// Logits for a batch. With a tape the intermediates are recorded on it.
Tensor forward(const ModelSpec& spec, const Parameters& params, const Tensor& batch, Tape* tape = nullptr);

/// Per-sample softmax cross-entropy (not averaged).
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Backpropagates from a scalar loss node and collects gradients for the
/// parameter nodes. Parameters that did not contribute get zero gradients.
Parameters backward(Tape& tape, NodeId loss, std::span<const NodeId> param_nodes);

/// Argmax per row, ties to the lowest class index.
std::vector<int> argmax_rows(const Tensor& logits);

std::vector<int> predict(const ModelSpec& spec, const Parameters& params, const Tensor& batch);

}  // namespace certiprob
