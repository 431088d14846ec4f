#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "certiprob/dataio.hpp"
#include "certiprob/model.hpp"
#include "certiprob/perturbation.hpp"
#include "certiprob/seqstat.hpp"

namespace certiprob {

struct CertifyConfig {
  VicinitySpec vicinity;
  double kappa = 1e-2;
  double alpha = 1e-2;
  std::uint64_t w_min = 30;
  std::uint64_t w_max = 10000;
  std::uint64_t test_every = 1;
  std::uint64_t seed = 0;
  std::size_t chunk = 64;  // vicinity samples classified per forward pass

  void validate() const;
  SequentialConfig sequential() const { return {kappa, alpha, w_min, w_max, test_every}; }
};

struct CertifiedPrediction {
  std::size_t id = 0;
  int label = -1;            // ground truth, -1 when unknown
  int predicted_class = -1;  // majority of the vicinity votes
  int plain_class = -1;      // single forward pass on the unperturbed input
  Verdict verdict = Verdict::kRunning;
  std::uint64_t samples_used = 0;
  std::uint64_t majority_count = 0;
  double p_left = 1.0;
  double p_right = 1.0;
  std::vector<std::pair<int, std::uint64_t>> counts;

  bool correct() const { return label >= 0 && predicted_class == label; }
};

/// Maps a batch [B, ...] to B class indices.
using Classifier = std::function<std::vector<int>(const Tensor& batch)>;

Classifier model_classifier(const ModelSpec& spec, const Parameters& params);

/// Sequential certification of one input: sample from the vicinity, classify,
/// update the count table, stop when a tail crosses alpha or w_max is reached.
/// The majority class is returned whatever the verdict.
CertifiedPrediction certify_one(const Classifier& classify, const Tensor& x, const CertifyConfig& config, Rng& rng);
CertifiedPrediction certify_one(const ModelSpec& spec, const Parameters& params, const Tensor& x,
                                const CertifyConfig& config, Rng& rng);

/// Per-input stream seed. Depends on the input contents rather than its
/// position so results do not change when the dataset is reordered.
std::uint64_t input_stream_seed(std::uint64_t seed, const Tensor& x);

struct CertifySummary {
  std::size_t count = 0;
  double certified_rate = 0.0;
  double certified_robust_accuracy = 0.0;
  double majority_accuracy = 0.0;
  double plain_accuracy = 0.0;
  double mean_samples = 0.0;
  double median_samples = 0.0;
};

struct CertifyReport {
  std::vector<CertifiedPrediction> predictions;
  CertifySummary summary;
};

CertifySummary summarize_certification(const std::vector<CertifiedPrediction>& preds);

CertifyReport certify_set(const Classifier& classify, const Dataset& data, const CertifyConfig& config,
                          std::size_t workers = 1);
CertifyReport certify_set(const ModelSpec& spec, const Parameters& params, const Dataset& data,
                          const CertifyConfig& config, std::size_t workers = 1);

}  // namespace certiprob
