#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "certiprob/dataio.hpp"
#include "certiprob/model.hpp"
#include "certiprob/vmtrain.hpp"

using namespace certiprob;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "certiprob_dataio_test";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Two 2x3 images and their labels, byte by byte.
std::vector<unsigned char> fixture_images() {
  return {0x00, 0x00, 0x08, 0x03,  // magic
          0x00, 0x00, 0x00, 0x02,  // count
          0x00, 0x00, 0x00, 0x02,  // rows
          0x00, 0x00, 0x00, 0x03,  // cols
          0, 255, 0, 255, 0, 255,  //
          51, 102, 153, 204, 255, 0};
}
std::vector<unsigned char> fixture_labels() { return {0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x02, 7, 3}; }

IdxErrorKind idx_error_kind(const fs::path& images, const fs::path& labels) {
  try {
    load_idx(images.string(), labels.string());
  } catch (const IdxError& e) {
    return e.kind();
  }
  FAIL("expected an IdxError");
  return IdxErrorKind::kBadMagic;
}

}  // namespace

TEST_CASE("hand-built IDX fixture parses exactly") {
  write_bytes(scratch("img"), fixture_images());
  write_bytes(scratch("lab"), fixture_labels());
  const Dataset ds = load_idx(scratch("img").string(), scratch("lab").string());
  CHECK(ds.inputs.shape() == Shape{2, 1, 2, 3});
  CHECK(ds.labels == std::vector<int>{7, 3});
  CHECK(ds.class_count == 10);
  const std::vector<double> first{0.0, 1.0, 0.0, 1.0, 0.0, 1.0};
  CHECK(ds.input(0).storage() == first);
  CHECK(ds.inputs[6] == 51.0 / 255.0);
  CHECK(ds.inputs[10] == 1.0);
}

TEST_CASE("IDX errors are distinct and name the file") {
  write_bytes(scratch("img"), fixture_images());
  write_bytes(scratch("lab"), fixture_labels());

  auto bad = fixture_images();
  bad[3] = 0x01;
  write_bytes(scratch("img_badmagic"), bad);
  CHECK(idx_error_kind(scratch("img_badmagic"), scratch("lab")) == IdxErrorKind::kBadMagic);
  try {
    load_idx(scratch("img_badmagic").string(), scratch("lab").string());
  } catch (const IdxError& e) {
    CHECK(std::string(e.what()).find("img_badmagic") != std::string::npos);
  }

  auto short_img = fixture_images();
  short_img.pop_back();
  write_bytes(scratch("img_short"), short_img);
  CHECK(idx_error_kind(scratch("img_short"), scratch("lab")) == IdxErrorKind::kTruncated);

  auto three = fixture_labels();
  three[7] = 3;
  three.push_back(1);
  write_bytes(scratch("lab_three"), three);
  CHECK(idx_error_kind(scratch("img"), scratch("lab_three")) == IdxErrorKind::kCountMismatch);

  CHECK_THROWS_AS(load_idx("/nonexistent/images", scratch("lab").string()), Error);
}

TEST_CASE("IDX round trip reproduces pixels") {
  Rng r(1);
  Dataset ds;
  ds.inputs = Tensor({5, 1, 4, 3});
  for (auto& v : ds.inputs.storage()) v = static_cast<double>(r.below(256)) / 255.0;
  ds.labels = {0, 1, 2, 9, 4};
  ds.class_count = 10;
  save_idx(ds, scratch("rt_img").string(), scratch("rt_lab").string());
  const Dataset back = load_idx(scratch("rt_img").string(), scratch("rt_lab").string());
  CHECK(back.inputs == ds.inputs);
  CHECK(back.labels == ds.labels);
}

TEST_CASE("train/validation split") {
  Dataset ds;
  ds.inputs = Tensor({10, 1});
  for (int i = 0; i < 10; ++i) ds.inputs[i] = i / 10.0, ds.labels.push_back(i % 2);
  ds.class_count = 2;
  const auto [tr, va] = split_train_val(ds, 0.8, 5);
  CHECK(tr.size() == 8);
  CHECK(va.size() == 2);
  std::set<double> seen;
  for (double v : tr.inputs.storage()) seen.insert(v);
  for (double v : va.inputs.storage()) CHECK(seen.insert(v).second);
  CHECK(seen.size() == 10);
  const auto again = split_train_val(ds, 0.8, 5);
  CHECK(again.first.inputs == tr.inputs);
  CHECK_FALSE(split_train_val(ds, 0.8, 6).first.inputs == tr.inputs);
  CHECK_THROWS_AS(split_train_val(ds, 1.0, 5), Error);

  Rng r(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + r.below(200);
    const double ratio = r.uniform(0.05, 0.95);
    Dataset d;
    d.inputs = Tensor({n, 1});
    for (std::size_t i = 0; i < n; ++i) d.inputs[i] = static_cast<double>(i) / n, d.labels.push_back(0);
    d.class_count = 1;
    const auto [a, b] = split_train_val(d, ratio, r.next());
    CHECK(a.size() + b.size() == n);
    std::set<double> all;
    for (double v : a.inputs.storage()) all.insert(v);
    for (double v : b.inputs.storage()) all.insert(v);
    CHECK(all.size() == n);
  }
}

TEST_CASE("two-blob generator") {
  const std::vector<std::array<double, 2>> centers{{0.3, 0.3}, {0.7, 0.7}};
  const Dataset still = make_blobs(5, centers, 0.0, 1);
  for (std::size_t i = 0; i < still.size(); ++i) {
    CHECK(still.inputs[2 * i] == centers[still.labels[i]][0]);
    CHECK(still.inputs[2 * i + 1] == centers[still.labels[i]][1]);
  }
  const Dataset ds = make_blobs(50, centers, 0.05, 2);
  CHECK(ds.size() == 100);
  CHECK(std::count(ds.labels.begin(), ds.labels.end(), 0) == 50);
  for (double v : ds.inputs.storage()) REQUIRE((v >= 0.0 && v <= 1.0));
  CHECK_THROWS_AS(make_blobs(5, {{0.5, 0.5}}, 0.1, 1), Error);
}

TEST_CASE("well-separated blobs are linearly separable by ERM") {
  const std::vector<std::array<double, 2>> centers{{0.3, 0.3}, {0.7, 0.7}};  // distance 0.57 >= 10 * 0.05
  const Dataset train_set = make_blobs(200, centers, 0.05, 3);
  const Dataset test_set = make_blobs(200, centers, 0.05, 4);
  ModelSpec linear;
  linear.input_shape = {2};
  linear.layers = {Layer::dense(2, 2)};
  linear.class_count = 2;
  TrainConfig cfg;
  cfg.lambda = 0.0;
  cfg.sample_size = 1;
  cfg.vicinity.epsilon = 1e-12;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.seed = 9;
  const Parameters p = train(linear, train_set, cfg).params;
  const auto pred = predict(linear, p, test_set.inputs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == test_set.labels[i] ? 1 : 0;
  CHECK(static_cast<double>(correct) / pred.size() >= 0.99);
}

TEST_CASE("bundled MNIST subset loads with the expected shapes") {
  const fs::path root(CERTIPROB_DATA_DIR);
  if (!fs::exists(root / "mnist/train-images-idx3-ubyte")) return;
  const Dataset tr = load_idx((root / "mnist/train-images-idx3-ubyte").string(),
                              (root / "mnist/train-labels-idx1-ubyte").string());
  CHECK(tr.inputs.shape() == Shape{8000, 1, 28, 28});
  CHECK(tr.class_count == 10);
  const auto [a, b] = split_train_val(tr, 0.8, 0);
  CHECK(a.size() == 6400);
  CHECK(b.size() == 1600);
}
