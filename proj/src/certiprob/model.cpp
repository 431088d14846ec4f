#include "certiprob/model.hpp"

#include <cmath>
#include <json.hpp>

#include "certiprob/error.hpp"
#include "certiprob/rng.hpp"

namespace certiprob {
namespace {

using nlohmann::json;

std::string layer_label(std::size_t idx, const Layer& l) {
  return "layer " + std::to_string(idx) + " (" + layer_kind_name(l.kind) + ")";
}

LayerKind kind_from_name(const std::string& name) {
  for (auto k : {LayerKind::kDense, LayerKind::kConv2d, LayerKind::kRelu, LayerKind::kMaxPool2, LayerKind::kFlatten})
    if (layer_kind_name(k) == name) return k;
  throw Error(ErrorCode::kFormat, "unknown layer kind '" + name + "'");
}

}  // namespace

std::string layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool2: return "maxpool2";
    case LayerKind::kFlatten: return "flatten";
  }
  return "?";
}

void ModelSpec::validate() const {
  require(class_count > 0, ErrorCode::kShapeMismatch, "model spec: class_count must be positive");
  require(!input_shape.empty() && shape_numel(input_shape) > 0, ErrorCode::kShapeMismatch,
          "model spec: empty input shape");
  Shape cur = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    const std::string where = layer_label(i, l);
    switch (l.kind) {
      case LayerKind::kDense:
        require(cur.size() == 1 && cur[0] == l.in && l.out > 0, ErrorCode::kShapeMismatch,
                where + ": expects [" + std::to_string(l.in) + "], receives " + shape_str(cur));
        cur = {l.out};
        break;
      case LayerKind::kConv2d:
        require(cur.size() == 3 && cur[0] == l.in && l.kernel > 0 && l.out > 0 && cur[1] >= l.kernel &&
                    cur[2] >= l.kernel,
                ErrorCode::kShapeMismatch, where + ": cannot apply to " + shape_str(cur));
        cur = {l.out, cur[1] - l.kernel + 1, cur[2] - l.kernel + 1};
        break;
      case LayerKind::kMaxPool2:
        require(cur.size() == 3 && cur[1] >= 2 && cur[2] >= 2, ErrorCode::kShapeMismatch,
                where + ": cannot apply to " + shape_str(cur));
        cur = {cur[0], cur[1] / 2, cur[2] / 2};
        break;
      case LayerKind::kFlatten:
        cur = {shape_numel(cur)};
        break;
      case LayerKind::kRelu:
        break;
    }
  }
  require(cur.size() == 1 && cur[0] == class_count, ErrorCode::kShapeMismatch,
          "model spec: final layer emits " + shape_str(cur) + ", expected [" + std::to_string(class_count) + "]");
}

std::vector<Shape> ModelSpec::parameter_shapes() const {
  std::vector<Shape> shapes;
  for (const Layer& l : layers) {
    if (l.kind == LayerKind::kDense) {
      shapes.push_back({l.out, l.in});
      shapes.push_back({l.out});
    } else if (l.kind == LayerKind::kConv2d) {
      shapes.push_back({l.out, l.in, l.kernel, l.kernel});
      shapes.push_back({l.out});
    }
  }
  return shapes;
}

std::string ModelSpec::to_json() const {
  json j;
  j["input_shape"] = input_shape;
  j["class_count"] = class_count;
  j["layers"] = json::array();
  for (const Layer& l : layers) {
    json lj{{"kind", layer_kind_name(l.kind)}};
    if (l.kind == LayerKind::kDense) {
      lj["in"] = l.in;
      lj["out"] = l.out;
    } else if (l.kind == LayerKind::kConv2d) {
      lj["in"] = l.in;
      lj["out"] = l.out;
      lj["kernel"] = l.kernel;
    }
    j["layers"].push_back(std::move(lj));
  }
  return j.dump();
}

ModelSpec ModelSpec::from_json(const std::string& text) {
  ModelSpec spec;
  try {
    const json j = json::parse(text);
    spec.input_shape = j.at("input_shape").get<Shape>();
    spec.class_count = j.at("class_count").get<std::size_t>();
    for (const json& lj : j.at("layers")) {
      Layer l;
      l.kind = kind_from_name(lj.at("kind").get<std::string>());
      l.in = lj.value("in", std::size_t{0});
      l.out = lj.value("out", std::size_t{0});
      l.kernel = lj.value("kernel", std::size_t{0});
      spec.layers.push_back(l);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("model spec JSON: ") + e.what());
  }
  spec.validate();
  return spec;
}

ModelSpec mlp_spec(Shape input_shape, std::span<const std::size_t> hidden, std::size_t classes) {
  ModelSpec spec;
  spec.input_shape = std::move(input_shape);
  spec.class_count = classes;
  std::size_t width = shape_numel(spec.input_shape);
  if (spec.input_shape.size() != 1) spec.layers.push_back(Layer::flatten());
  for (std::size_t h : hidden) {
    spec.layers.push_back(Layer::dense(width, h));
    spec.layers.push_back(Layer::relu());
    width = h;
  }
  spec.layers.push_back(Layer::dense(width, classes));
  spec.validate();
  return spec;
}

ModelSpec convnet_small_spec(std::size_t channels, std::size_t height, std::size_t width, std::size_t classes) {
  ModelSpec spec;
  spec.input_shape = {channels, height, width};
  spec.class_count = classes;
  const std::size_t h1 = (height - 2) / 2, w1 = (width - 2) / 2;
  require(h1 >= 3 && w1 >= 3, ErrorCode::kShapeMismatch, "convnet_small: input too small");
  const std::size_t h2 = (h1 - 2) / 2, w2 = (w1 - 2) / 2;
  spec.layers = {Layer::conv2d(channels, 16, 3), Layer::relu(), Layer::maxpool2(),
                 Layer::conv2d(16, 32, 3),       Layer::relu(), Layer::maxpool2(),
                 Layer::flatten(),               Layer::dense(32 * h2 * w2, 128), Layer::relu(),
                 Layer::dense(128, classes)};
  spec.validate();
  return spec;
}

Parameters zeros_like(const ModelSpec& spec) {
  Parameters p;
  for (auto& s : spec.parameter_shapes()) p.tensors.emplace_back(s);
  return p;
}

Parameters he_init(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  Parameters p = zeros_like(spec);
  for (std::size_t i = 0; i < p.tensors.size(); i += 2) {
    Tensor& w = p.tensors[i];
    const std::size_t fan_in = w.size() / w.dim(0);
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : w.data()) v = sd * rng.normal();
  }
  return p;
}

void check_parameters(const ModelSpec& spec, const Parameters& params) {
  const auto shapes = spec.parameter_shapes();
  require(shapes.size() == params.tensors.size(), ErrorCode::kShapeMismatch,
          "parameters: expected " + std::to_string(shapes.size()) + " tensors, got " +
              std::to_string(params.tensors.size()));
  for (std::size_t i = 0; i < shapes.size(); ++i)
    require(shapes[i] == params.tensors[i].shape(), ErrorCode::kShapeMismatch,
            "parameter " + std::to_string(i) + ": expected " + shape_str(shapes[i]) + ", got " +
                shape_str(params.tensors[i].shape()));
}

std::vector<NodeId> bind_parameters(Tape& tape, const Parameters& params, bool requires_grad) {
  std::vector<NodeId> ids;
  ids.reserve(params.tensors.size());
  for (const Tensor& t : params.tensors) ids.push_back(tape.leaf(t, requires_grad));
  return ids;
}

NodeId forward_on_tape(Tape& tape, const ModelSpec& spec, std::span<const NodeId> param_nodes, NodeId input) {
  const Tensor& x = tape.value(input);
  require(x.rank() == spec.input_shape.size() + 1 &&
              Shape(x.shape().begin() + 1, x.shape().end()) == spec.input_shape,
          ErrorCode::kShapeMismatch,
          "forward: batch shape " + shape_str(x.shape()) + " does not match model input " + shape_str(spec.input_shape));
  const std::size_t batch = x.dim(0);
  NodeId cur = input;
  std::size_t p = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const Layer& l = spec.layers[i];
    try {
      switch (l.kind) {
        case LayerKind::kDense:
          cur = ops::dense(tape, cur, param_nodes[p], param_nodes[p + 1]);
          p += 2;
          break;
        case LayerKind::kConv2d:
          cur = ops::conv2d(tape, cur, param_nodes[p], param_nodes[p + 1]);
          p += 2;
          break;
        case LayerKind::kRelu:
          cur = ops::relu(tape, cur);
          break;
        case LayerKind::kMaxPool2:
          cur = ops::maxpool2(tape, cur);
          break;
        case LayerKind::kFlatten:
          cur = ops::reshape(tape, cur, {batch, tape.value(cur).size() / batch});
          break;
      }
    } catch (const Error& e) {
      throw Error(e.code(), layer_label(i, l) + ": " + e.what());
    }
  }
  return cur;
}

Tensor forward(const ModelSpec& spec, const Parameters& params, const Tensor& batch, Tape* tape) {
  check_parameters(spec, params);
  Tape local(false);
  Tape& t = tape ? *tape : local;
  const auto pn = bind_parameters(t, params);
  const NodeId in = t.leaf(batch, false);
  return t.value(forward_on_tape(t, spec, pn, in));
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  Tape t(false);
  const NodeId z = t.leaf(logits, false);
  return t.value(ops::cross_entropy(t, z, labels));
}

Parameters backward(Tape& tape, NodeId loss, std::span<const NodeId> param_nodes) {
  tape.backward(loss);
  Parameters g;
  g.tensors.reserve(param_nodes.size());
  for (NodeId id : param_nodes) g.tensors.push_back(tape.grad(id));
  return g;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  require(logits.rank() == 2, ErrorCode::kShapeMismatch, "argmax_rows expects [B,C]");
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  std::vector<int> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c)
      if (logits[i * cols + c] > logits[i * cols + best]) best = c;
    out[i] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const ModelSpec& spec, const Parameters& params, const Tensor& batch) {
  return argmax_rows(forward(spec, params, batch));
}

}  // namespace certiprob
