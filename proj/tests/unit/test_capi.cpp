#include <doctest.h>

#include <certiprob/certiprob.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("certiprob_capi_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const char* kBlobs = R"(seed = 3
[data]
source = "blobs"
[data.blobs]
per_class = 40
test_per_class = 10
[model]
hidden = [8]
[train]
epochs = 3
batch_size = 16
[train.optimizer]
kind = "sgd"
lr = 0.2
[train.vicinity]
epsilon = 0.05
[certify]
w_max = 600
)";

}  // namespace

TEST_CASE("version and binomial tails") {
  CHECK(std::string(cp_version()).find("certiprob") == 0);
  double t = 0;
  REQUIRE(cp_binom_tail_right(10, 10, 0.9, &t) == CP_OK);
  CHECK(t == doctest::Approx(std::pow(0.9, 10)).epsilon(1e-13));
  CHECK(std::string(cp_last_error()).empty());
  REQUIRE(cp_binom_tail_left(0, 10, 0.99, &t) == CP_OK);
  CHECK(t == doctest::Approx(1e-20).epsilon(1e-10));
  CHECK(cp_binom_tail_right(1, 2, 1.5, &t) == CP_ERR_INVALID_ARGUMENT);
  CHECK(std::string(cp_last_error()).find("p0") != std::string::npos);
  CHECK(cp_binom_tail_right(1, 2, 0.5, nullptr) == CP_ERR_INVALID_ARGUMENT);
}

TEST_CASE("datasets") {
  const double centers[] = {0.3, 0.3, 0.7, 0.7};
  cp_dataset* ds = nullptr;
  REQUIRE(cp_dataset_blobs(25, centers, 2, 0.05, 1, &ds) == CP_OK);
  CHECK(cp_dataset_size(ds) == 50);
  CHECK(cp_dataset_sample_numel(ds) == 2);
  cp_dataset_free(ds);

  const std::string root = CERTIPROB_DATA_DIR;
  REQUIRE(cp_dataset_load_idx((root + "/mnist/test-images-idx3-ubyte").c_str(),
                              (root + "/mnist/test-labels-idx1-ubyte").c_str(), &ds) == CP_OK);
  CHECK(cp_dataset_size(ds) == 2000);
  CHECK(cp_dataset_sample_numel(ds) == 784);
  cp_dataset_free(ds);

  cp_dataset* none = nullptr;
  CHECK(cp_dataset_load_idx("/nonexistent/a", "/nonexistent/b", &none) == CP_ERR_IO);
  CHECK(none == nullptr);
  CHECK(std::strlen(cp_last_error()) > 0);
  cp_dataset_free(nullptr);
}

TEST_CASE("run pipeline, model handle and report") {
  TempDir tmp;
  const std::string cfg = (tmp.path / "c.toml").string(), out = (tmp.path / "run").string();
  std::ofstream(cfg) << kBlobs;

  cp_run_options o{};
  o.config_path = cfg.c_str();
  o.out_dir = out.c_str();
  REQUIRE(cp_run_train(&o) == CP_OK);
  REQUIRE(cp_run_eval(&o) == CP_OK);

  char* text = nullptr;
  REQUIRE(cp_run_report(&o, &text) == CP_OK);
  CHECK(std::string(text).find("certified robustness rate") != std::string::npos);
  cp_string_free(text);

  cp_model* m = nullptr;
  REQUIRE(cp_model_load((out + "/model.cprb").c_str(), &m) == CP_OK);
  CHECK(cp_model_class_count(m) == 2);
  char* spec = nullptr;
  REQUIRE(cp_model_spec_json(m, &spec) == CP_OK);
  CHECK(std::string(spec).find("\"dense\"") != std::string::npos);
  cp_string_free(spec);

  const double xs[] = {0.3, 0.3, 0.7, 0.7};
  int classes[2] = {-1, -1};
  REQUIRE(cp_model_predict(m, xs, 2, classes) == CP_OK);
  CHECK((classes[0] == 0 || classes[0] == 1));
  CHECK((classes[1] == 0 || classes[1] == 1));

  const std::string copy = (tmp.path / "copy.cprb").string();
  REQUIRE(cp_model_save(m, copy.c_str()) == CP_OK);
  std::ifstream a(out + "/model.cprb", std::ios::binary), b(copy, std::ios::binary);
  CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));
  cp_model_free(m);

  cp_run_options bad{};
  const std::string missing = (tmp.path / "nope.toml").string();
  bad.config_path = missing.c_str();
  CHECK(cp_run_train(&bad) == CP_ERR_CONFIG);
  CHECK(cp_run_train(nullptr) == CP_ERR_INVALID_ARGUMENT);
  cp_run_options empty_run{};
  const std::string nowhere = (tmp.path / "empty").string();
  empty_run.out_dir = nowhere.c_str();
  char* t2 = nullptr;
  CHECK(cp_run_report(&empty_run, &t2) == CP_ERR_IO);
  CHECK(t2 == nullptr);
}

TEST_CASE("config reference") {
  char* text = nullptr;
  REQUIRE(cp_config_reference(&text) == CP_OK);
  CHECK(std::string(text).find("[certify]") != std::string::npos);
  cp_string_free(text);
}
