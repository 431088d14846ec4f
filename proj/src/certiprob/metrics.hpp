#pragma once

#include <string>
#include <vector>

#include "certiprob/attacks.hpp"
#include "certiprob/certify.hpp"
#include "certiprob/seqstat.hpp"

namespace certiprob {

struct EvalRecord {
  std::size_t id = 0;
  int ground_truth = -1;
  int plain_pred = -1;
  int majority_pred = -1;
  Verdict verdict = Verdict::kUndecided;
  std::uint64_t samples_used = 0;

  static EvalRecord from_prediction(const CertifiedPrediction& p);
};

enum class PredictionSource { kPlain, kMajority };

/// Mean of 1[pred == ground truth]. Throws on an empty record set.
double standard_accuracy(const std::vector<EvalRecord>& records, PredictionSource source = PredictionSource::kMajority);

/// Mean of 1[verdict == certified]; undecided counts as not certified.
double certified_robustness_rate(const std::vector<EvalRecord>& records);

/// Mean of 1[certified] * 1[majority prediction correct].
double certified_robust_accuracy(const std::vector<EvalRecord>& records);

struct AttackRate {
  std::string kind;
  double epsilon = 0.0;
  std::string inference;
  double rate = 0.0;
};

struct Summary {
  std::size_t count = 0;
  double standard_accuracy = 0.0;        // majority predictions
  double plain_accuracy = 0.0;           // single-pass predictions
  double certified_robustness_rate = 0.0;
  double certified_robust_accuracy = 0.0;
  double mean_samples = 0.0;
  double median_samples = 0.0;
  std::vector<AttackRate> defence;

  /// Fixed field order: count, standard_accuracy, plain_accuracy,
  /// certified_robustness_rate, certified_robust_accuracy, mean_samples,
  /// median_samples, defence[] {kind, epsilon, inference, rate}.
  std::string to_json() const;
  /// One header row then one row per metric: metric,value. Defence rates use
  /// the metric name defence:<kind>:<epsilon>:<inference>.
  std::string to_csv() const;
};

Summary summarize(const std::vector<EvalRecord>& records, const std::vector<AttackRate>& attacks);

AttackRate attack_rate(const DefenceResult& result);

}  // namespace certiprob
