#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "certiprob/attacks.hpp"
#include "certiprob/certify.hpp"
#include "certiprob/vmtrain.hpp"

namespace certiprob {

/// Minimal TOML-style reader: `[section]` / `[section.sub]` headers,
/// `key = value` pairs, `#` comments. Values are quoted strings, numbers,
/// booleans, or flat arrays of those. Keys are addressed by dotted path.
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text, const std::string& origin = "<config>");
  static ConfigFile load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::set<std::string> keys() const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;

  void set(const std::string& key, const std::string& raw) { values_[key] = {raw, 0}; }

 private:
  struct Value {
    std::string raw;
    int line = 0;
  };
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;
  std::vector<std::string> array_items(const std::string& key) const;

  std::string origin_;
  std::map<std::string, Value> values_;
};

struct DataConfig {
  std::string source = "idx";  // idx | blobs
  std::string root;            // base for relative paths; CERTIPROB_DATA overrides
  std::string images = "mnist/train-images-idx3-ubyte";
  std::string labels = "mnist/train-labels-idx1-ubyte";
  std::string test_images = "mnist/test-images-idx3-ubyte";
  std::string test_labels = "mnist/test-labels-idx1-ubyte";
  double ratio = 0.8;  // train share of the train/validation split; 1 disables the split
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
  std::size_t blobs_per_class = 200;
  std::size_t blobs_test_per_class = 100;
  double blobs_spread = 0.05;
  std::vector<std::array<double, 2>> blobs_centers{{0.3, 0.3}, {0.7, 0.7}};
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string out = "run";
  DataConfig data;
  std::string model = "mlp";  // mlp | convnet_small
  std::vector<std::size_t> hidden{256};
  TrainConfig train;
  int checkpoint_every = 0;
  CertifyConfig certify;
  std::vector<AttackConfig> attacks;
  std::string attack_inference = "both";  // plain | certified | both

  /// Validates and resolves a parsed file. Unknown keys are rejected with
  /// their dotted path.
  static RunConfig from_file(const ConfigFile& file);

  /// Canonical resolved form; parses back to the same config.
  std::string resolved_text() const;
  /// Fingerprint of the resolved form minus `workers`, `out` and `data.root`,
  /// which do not affect results.
  std::string hash() const;
};

/// Text for --help: every key with its default and where the default comes from.
std::string config_reference();

}  // namespace certiprob
