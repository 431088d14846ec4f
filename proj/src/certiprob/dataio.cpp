#include "certiprob/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "certiprob/rng.hpp"

namespace certiprob {
namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::kIo, "cannot open '" + path + "'");
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::uint32_t be32(const std::string& b, std::size_t off) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 3]));
}

void put_be32(std::ofstream& f, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  f.write(b, 4);
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Shape shape = inputs.shape();
  shape[0] = indices.size();
  const std::size_t stride = inputs.size() / std::max<std::size_t>(size(), 1);
  Dataset out{Tensor(shape), {}, class_count};
  out.labels.reserve(indices.size());
  auto dst = out.inputs.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t j = indices[i];
    require(j < size(), ErrorCode::kInvalidArgument, "subset index out of range");
    std::copy_n(inputs.data().begin() + static_cast<std::ptrdiff_t>(j * stride), stride,
                dst.begin() + static_cast<std::ptrdiff_t>(i * stride));
    out.labels.push_back(labels[j]);
  }
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  std::vector<std::size_t> idx(std::min(n, size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return subset(idx);
}

void Dataset::validate() const {
  require(inputs.rank() >= 2 && inputs.dim(0) == labels.size(), ErrorCode::kShapeMismatch,
          "dataset: inputs and labels disagree in length");
  for (int l : labels)
    require(l >= 0 && static_cast<std::size_t>(l) < class_count, ErrorCode::kInvalidArgument,
            "dataset: label out of range");
  for (double v : inputs.data())
    require(v >= 0.0 && v <= 1.0, ErrorCode::kInvalidArgument, "dataset: input value outside [0,1]");
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const std::string img = read_file(images_path);
  const std::string lab = read_file(labels_path);

  if (img.size() < 16 || be32(img, 0) != 0x00000803)
    throw IdxError(IdxErrorKind::kBadMagic, images_path + ": bad magic (expected 0x00000803)");
  if (lab.size() < 8 || be32(lab, 0) != 0x00000801)
    throw IdxError(IdxErrorKind::kBadMagic, labels_path + ": bad magic (expected 0x00000801)");

  const std::size_t n = be32(img, 4), rows = be32(img, 8), cols = be32(img, 12);
  const std::size_t n_labels = be32(lab, 4);
  if (n != n_labels)
    throw IdxError(IdxErrorKind::kCountMismatch, "image count " + std::to_string(n) + " in " + images_path +
                                                     " does not match label count " + std::to_string(n_labels) +
                                                     " in " + labels_path);
  if (img.size() < 16 + n * rows * cols)
    throw IdxError(IdxErrorKind::kTruncated, images_path + ": truncated payload");
  if (lab.size() < 8 + n) throw IdxError(IdxErrorKind::kTruncated, labels_path + ": truncated payload");

  Dataset ds{Tensor(Shape{n, 1, rows, cols}), std::vector<int>(n), 0};
  auto px = ds.inputs.data();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<unsigned char>(img[16 + i]) / 255.0;
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = static_cast<unsigned char>(lab[8 + i]);
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.class_count = std::max<std::size_t>(10, static_cast<std::size_t>(max_label) + 1);
  return ds;
}

void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
  const Shape& s = ds.inputs.shape();
  require(s.size() >= 3, ErrorCode::kShapeMismatch, "save_idx: inputs need at least [N, rows, cols]");
  const std::size_t rows = s[s.size() - 2], cols = s[s.size() - 1];
  require(ds.inputs.size() == ds.size() * rows * cols, ErrorCode::kShapeMismatch,
          "save_idx: only single-channel images are supported");
  std::ofstream fi(images_path, std::ios::binary);
  std::ofstream fl(labels_path, std::ios::binary);
  require(fi.good() && fl.good(), ErrorCode::kIo, "save_idx: cannot open output files");
  put_be32(fi, 0x00000803);
  put_be32(fi, static_cast<std::uint32_t>(ds.size()));
  put_be32(fi, static_cast<std::uint32_t>(rows));
  put_be32(fi, static_cast<std::uint32_t>(cols));
  for (double v : ds.inputs.data()) fi.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  put_be32(fl, 0x00000801);
  put_be32(fl, static_cast<std::uint32_t>(ds.size()));
  for (int l : ds.labels) fl.put(static_cast<char>(l));
  require(fi.good() && fl.good(), ErrorCode::kIo, "save_idx: write failed");
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& ds, double ratio, std::uint64_t seed) {
  require(ratio > 0.0 && ratio < 1.0, ErrorCode::kInvalidArgument, "split ratio must lie in (0, 1)");
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(ds.size())));
  std::span<const std::size_t> all(idx);
  return {ds.subset(all.first(n_train)), ds.subset(all.subspan(n_train))};
}

Dataset make_blobs(std::size_t n_per_class, const std::vector<std::array<double, 2>>& centers, double spread,
                   std::uint64_t seed) {
  require(centers.size() >= 2, ErrorCode::kInvalidArgument, "make_blobs: need at least two centers");
  require(spread >= 0.0, ErrorCode::kInvalidArgument, "make_blobs: spread must be non-negative");
  Rng rng(seed);
  const std::size_t n = n_per_class * centers.size();
  Dataset ds{Tensor(Shape{n, 2}), std::vector<int>(n), centers.size()};
  for (std::size_t c = 0; c < centers.size(); ++c)
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const std::size_t row = c * n_per_class + i;
      for (std::size_t k = 0; k < 2; ++k)
        ds.inputs[row * 2 + k] = std::clamp(centers[c][k] + spread * rng.normal(), 0.0, 1.0);
      ds.labels[row] = static_cast<int>(c);
    }
  return ds;
}

}  // namespace certiprob
