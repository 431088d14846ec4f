#include "certiprob/metrics.hpp"

#include <algorithm>
#include <json.hpp>
#include <sstream>

#include "certiprob/error.hpp"

namespace certiprob {
namespace {

void require_nonempty(const std::vector<EvalRecord>& r) {
  require(!r.empty(), ErrorCode::kInvalidArgument, "metrics: empty record set");
}

std::string fmt_double(double v) {
  // Shortest round-trip representation, same as the JSON writer.
  return nlohmann::json(v).dump();
}

}  // namespace

EvalRecord EvalRecord::from_prediction(const CertifiedPrediction& p) {
  return {p.id, p.label, p.plain_class, p.predicted_class, p.verdict, p.samples_used};
}

double standard_accuracy(const std::vector<EvalRecord>& records, PredictionSource source) {
  require_nonempty(records);
  std::size_t ok = 0;
  for (const auto& r : records) {
    const int pred = source == PredictionSource::kPlain ? r.plain_pred : r.majority_pred;
    ok += pred == r.ground_truth;
  }
  return static_cast<double>(ok) / static_cast<double>(records.size());
}

double certified_robustness_rate(const std::vector<EvalRecord>& records) {
  require_nonempty(records);
  std::size_t c = 0;
  for (const auto& r : records) c += r.verdict == Verdict::kCertified;
  return static_cast<double>(c) / static_cast<double>(records.size());
}

double certified_robust_accuracy(const std::vector<EvalRecord>& records) {
  require_nonempty(records);
  std::size_t c = 0;
  for (const auto& r : records) c += r.verdict == Verdict::kCertified && r.majority_pred == r.ground_truth;
  return static_cast<double>(c) / static_cast<double>(records.size());
}

AttackRate attack_rate(const DefenceResult& result) {
  return {attack_kind_name(result.attack.kind), result.attack.epsilon, inference_mode_name(result.inference),
          result.rate};
}

Summary summarize(const std::vector<EvalRecord>& records, const std::vector<AttackRate>& attacks) {
  Summary s;
  s.count = records.size();
  s.defence = attacks;
  if (records.empty()) return s;
  s.standard_accuracy = standard_accuracy(records, PredictionSource::kMajority);
  s.plain_accuracy = standard_accuracy(records, PredictionSource::kPlain);
  s.certified_robustness_rate = certified_robustness_rate(records);
  s.certified_robust_accuracy = certified_robust_accuracy(records);
  std::vector<double> used;
  double total = 0.0;
  for (const auto& r : records) {
    used.push_back(static_cast<double>(r.samples_used));
    total += static_cast<double>(r.samples_used);
  }
  std::sort(used.begin(), used.end());
  const std::size_t mid = used.size() / 2;
  s.mean_samples = total / static_cast<double>(used.size());
  s.median_samples = used.size() % 2 ? used[mid] : 0.5 * (used[mid - 1] + used[mid]);
  return s;
}

std::string Summary::to_json() const {
  nlohmann::ordered_json j;
  j["count"] = count;
  j["standard_accuracy"] = standard_accuracy;
  j["plain_accuracy"] = plain_accuracy;
  j["certified_robustness_rate"] = certified_robustness_rate;
  j["certified_robust_accuracy"] = certified_robust_accuracy;
  j["mean_samples"] = mean_samples;
  j["median_samples"] = median_samples;
  if (!defence.empty()) {
    j["defence"] = nlohmann::ordered_json::array();
    for (const auto& a : defence) {
      nlohmann::ordered_json aj;
      aj["kind"] = a.kind;
      aj["epsilon"] = a.epsilon;
      aj["inference"] = a.inference;
      aj["rate"] = a.rate;
      j["defence"].push_back(std::move(aj));
    }
  }
  return j.dump();
}

std::string Summary::to_csv() const {
  std::ostringstream os;
  os << "metric,value\n";
  os << "count," << count << '\n';
  os << "standard_accuracy," << fmt_double(standard_accuracy) << '\n';
  os << "plain_accuracy," << fmt_double(plain_accuracy) << '\n';
  os << "certified_robustness_rate," << fmt_double(certified_robustness_rate) << '\n';
  os << "certified_robust_accuracy," << fmt_double(certified_robust_accuracy) << '\n';
  os << "mean_samples," << fmt_double(mean_samples) << '\n';
  os << "median_samples," << fmt_double(median_samples) << '\n';
  for (const auto& a : defence)
    os << "defence:" << a.kind << ':' << fmt_double(a.epsilon) << ':' << a.inference << ',' << fmt_double(a.rate)
       << '\n';
  return os.str();
}

}  // namespace certiprob
