#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "certiprob/dataio.hpp"
#include "certiprob/model.hpp"
#include "certiprob/perturbation.hpp"

namespace certiprob {

/// How the per-vicinity loss spread is computed.
///   kPaperLiteral: sqrt(sum_a sum_b (u_a - u_b)^2 / n), equal to sqrt(2n) times
///                  the biased standard deviation.
///   kSampleSd:     sqrt(sum_j (u_j - mean)^2 / max(n - 1, 1)).
enum class SigmaMode { kPaperLiteral, kSampleSd };

std::string sigma_mode_name(SigmaMode mode);
SigmaMode sigma_mode_from_name(const std::string& name);

struct LossStats {
  double mu = 0.0;
  double sigma = 0.0;
  std::vector<double> per_sample;
};

LossStats loss_stats(std::span<const double> u, SigmaMode mode);

namespace ops {
/// Spread of consecutive groups of `group` losses: [m*group] -> [m]. The
/// gradient at zero spread is taken as 0.
NodeId group_spread(Tape& t, NodeId u, std::size_t group, SigmaMode mode);
}  // namespace ops

enum class OptimizerKind { kSgd, kAdadelta };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdadelta;
  double lr = 1.0;
  double weight_decay = 3.5e-3;        // sgd
  std::vector<int> milestones{55, 75, 90};  // sgd
  double decay_factor = 0.1;           // sgd
  double rho = 0.9;                    // adadelta
  double eps = 1e-6;                   // adadelta
};

struct TrainConfig {
  VicinitySpec vicinity;
  std::size_t sample_size = 4;  // perturbed samples per example
  std::size_t batch_size = 64;
  double lambda = 1.0;
  OptimizerConfig optimizer;
  int epochs = 10;
  std::uint64_t seed = 0;
  SigmaMode sigma_mode = SigmaMode::kPaperLiteral;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double mean_mu = 0.0;
  double mean_sigma = 0.0;
  double train_acc = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;

  std::string to_json() const;
};

struct ObjectiveNodes {
  NodeId objective;  // scalar
  NodeId losses;     // per-sample cross-entropy [m*group]
  NodeId logits;     // [m*group, C]
};

/// Scalar objective sum_i (mu_i + lambda * sigma_i) / m over a stacked batch of
/// m groups of `group` perturbed samples, each group sharing a label.
ObjectiveNodes minibatch_objective(Tape& tape, const ModelSpec& spec, std::span<const NodeId> param_nodes,
                                   const Tensor& samples, std::span<const int> group_labels, std::size_t group,
                                   double lambda, SigmaMode mode);

/// Objective mu + lambda * sigma over n fresh samples from the vicinity of x.
NodeId vicinity_objective(Tape& tape, const ModelSpec& spec, std::span<const NodeId> param_nodes,
                          const Tensor& x, int label, const TrainConfig& config, Rng& rng);

/// Random-stream contract used by train():
///   initialization     he_init(spec, derive_seed(seed, 0))
///   minibatch order    Rng(derive_seed(seed, 1)); one Fisher-Yates shuffle per epoch
///   perturbations      Rng(derive_seed(seed, 2)); per step, per example in batch
///                      order, n draws via sample_vicinity
struct TrainStreams {
  static std::uint64_t init(std::uint64_t seed) { return derive_seed(seed, 0); }
  static std::uint64_t batches(std::uint64_t seed) { return derive_seed(seed, 1); }
  static std::uint64_t perturb(std::uint64_t seed) { return derive_seed(seed, 2); }
};

/// Epoch permutation drawn from the minibatch stream.
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

struct TrainResult {
  Parameters params;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&, const Parameters&)>;

/// Variance-minimizing training. Runs `epochs` passes of ceil(k/m) steps; each
/// step updates theta with the gradient of the minibatch objective.
/// Throws ErrorCode::kNumeric on a non-finite loss, naming the step and example.
TrainResult train(const ModelSpec& spec, const Dataset& data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Same as train() but starting from the given parameters.
TrainResult train_from(const ModelSpec& spec, Parameters init, const Dataset& data, const TrainConfig& config,
                       const EpochCallback& on_epoch = {});

}  // namespace certiprob
