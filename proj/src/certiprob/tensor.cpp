#include "certiprob/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "certiprob/error.hpp"

namespace certiprob {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  require(shape_numel(shape_) == data_.size(), ErrorCode::kShapeMismatch,
          "tensor data length " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
}

double Tensor::item() const {
  require(data_.size() == 1, ErrorCode::kShapeMismatch, "item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

Tensor Tensor::row(std::size_t i) const {
  require(!shape_.empty() && i < shape_[0], ErrorCode::kInvalidArgument, "row index out of range");
  Shape tail(shape_.begin() + 1, shape_.end());
  const std::size_t stride = shape_numel(tail);
  return Tensor(tail, std::vector<double>(data_.begin() + i * stride, data_.begin() + (i + 1) * stride));
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor stack(std::span<const Tensor> items) {
  require(!items.empty(), ErrorCode::kInvalidArgument, "stack of zero tensors");
  Shape shape{items.size()};
  shape.insert(shape.end(), items[0].shape().begin(), items[0].shape().end());
  Tensor out(shape);
  const std::size_t stride = items[0].size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    require(items[i].shape() == items[0].shape(), ErrorCode::kShapeMismatch, "stack of mismatched shapes");
    std::memcpy(out.data().data() + i * stride, items[i].data().data(), stride * sizeof(double));
  }
  return out;
}

}  // namespace certiprob
