#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "certiprob/error.hpp"
#include "certiprob/tensor.hpp"

namespace certiprob {

/// Labeled inputs in [0,1]. Immutable once built.
struct Dataset {
  Tensor inputs;            // [N, ...]
  std::vector<int> labels;  // [N]
  std::size_t class_count = 0;

  std::size_t size() const { return labels.size(); }
  Shape sample_shape() const { return Shape(inputs.shape().begin() + 1, inputs.shape().end()); }
  Tensor input(std::size_t i) const { return inputs.row(i); }
  Dataset subset(std::span<const std::size_t> indices) const;
  /// First `n` samples (or all, if fewer).
  Dataset head(std::size_t n) const;
  void validate() const;
};

enum class IdxErrorKind { kBadMagic, kTruncated, kCountMismatch };

class IdxError : public Error {
 public:
  IdxError(IdxErrorKind kind, const std::string& what) : Error(ErrorCode::kFormat, what), kind_(kind) {}
  IdxErrorKind kind() const noexcept { return kind_; }

 private:
  IdxErrorKind kind_;
};

/// Reads an MNIST-style IDX pair: images (magic 0x00000803, [N, rows, cols]
/// uint8) and labels (magic 0x00000801, [N] uint8). Pixels scale to v/255 and
/// inputs take shape [N, 1, rows, cols]. The class count is max(label) + 1,
/// or 10 when every label is below 10.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Writes inputs as uint8 (round(v*255)) in the same layout.
void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path);

/// Seeded shuffle, then the first round(ratio*N) samples form the training part.
std::pair<Dataset, Dataset> split_train_val(const Dataset& ds, double ratio, std::uint64_t seed);

/// Balanced 2-D Gaussian blobs clipped to [0,1]^2, class-major order.
Dataset make_blobs(std::size_t n_per_class, const std::vector<std::array<double, 2>>& centers, double spread,
                   std::uint64_t seed);

}  // namespace certiprob
