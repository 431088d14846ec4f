#include "certiprob/certify.hpp"

#include <algorithm>
#include <string_view>

#include "certiprob/error.hpp"
#include "certiprob/hash.hpp"
#include "certiprob/parallel.hpp"

namespace certiprob {

void CertifyConfig::validate() const {
  vicinity.validate();
  sequential().validate();
  require(chunk >= 1, ErrorCode::kConfig, "certify.chunk must be >= 1");
}

Classifier model_classifier(const ModelSpec& spec, const Parameters& params) {
  return [&spec, &params](const Tensor& batch) { return predict(spec, params, batch); };
}

std::uint64_t input_stream_seed(std::uint64_t seed, const Tensor& x) {
  const auto bytes = x.data();
  return derive_seed(seed, fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                                    bytes.size() * sizeof(double))));
}

CertifiedPrediction certify_one(const Classifier& classify, const Tensor& x, const CertifyConfig& config,
                                Rng& rng) {
  config.validate();
  const SequentialConfig seq = config.sequential();
  CertifiedPrediction out;
  {
    Shape s{1};
    s.insert(s.end(), x.shape().begin(), x.shape().end());
    out.plain_class = classify(x.reshaped(s)).at(0);
  }
  SequentialTestState state;
  while (!state.stopped()) {
    const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(config.chunk, config.w_max - state.w));
    const PerturbationBatch pb = sample_vicinity(config.vicinity, x, n, rng);
    const std::vector<int> votes = classify(pb.samples);
    for (int vote : votes) {
      seq_update(state, vote, seq);
      if (state.stopped()) break;
    }
  }
  out.predicted_class = state.majority;
  out.verdict = state.verdict;
  out.samples_used = state.w;
  out.majority_count = state.v;
  out.p_left = state.p_left;
  out.p_right = state.p_right;
  out.counts.assign(state.counts.begin(), state.counts.end());
  return out;
}

CertifiedPrediction certify_one(const ModelSpec& spec, const Parameters& params, const Tensor& x,
                                const CertifyConfig& config, Rng& rng) {
  return certify_one(model_classifier(spec, params), x, config, rng);
}

CertifySummary summarize_certification(const std::vector<CertifiedPrediction>& preds) {
  CertifySummary s;
  s.count = preds.size();
  if (preds.empty()) return s;
  std::size_t cert = 0, cert_ok = 0, maj_ok = 0, plain_ok = 0;
  std::vector<double> used;
  used.reserve(preds.size());
  double total = 0.0;
  for (const auto& p : preds) {
    const bool certified = p.verdict == Verdict::kCertified;
    cert += certified;
    cert_ok += certified && p.correct();
    maj_ok += p.correct();
    plain_ok += p.label >= 0 && p.plain_class == p.label;
    used.push_back(static_cast<double>(p.samples_used));
    total += static_cast<double>(p.samples_used);
  }
  const auto n = static_cast<double>(preds.size());
  s.certified_rate = cert / n;
  s.certified_robust_accuracy = cert_ok / n;
  s.majority_accuracy = maj_ok / n;
  s.plain_accuracy = plain_ok / n;
  s.mean_samples = total / n;
  std::sort(used.begin(), used.end());
  const std::size_t mid = used.size() / 2;
  s.median_samples = used.size() % 2 ? used[mid] : 0.5 * (used[mid - 1] + used[mid]);
  return s;
}

CertifyReport certify_set(const Classifier& classify, const Dataset& data, const CertifyConfig& config,
                          std::size_t workers) {
  config.validate();
  require(data.size() > 0, ErrorCode::kInvalidArgument, "certify_set: empty dataset");
  CertifyReport report;
  report.predictions.resize(data.size());
  parallel_for(data.size(), workers, [&](std::size_t i) {
    const Tensor x = data.input(i);
    Rng rng(input_stream_seed(config.seed, x));
    try {
      CertifiedPrediction p = certify_one(classify, x, config, rng);
      p.id = i;
      p.label = data.labels[i];
      report.predictions[i] = std::move(p);
    } catch (const Error& e) {
      throw Error(e.code(), "input " + std::to_string(i) + ": " + e.what());
    }
  });
  report.summary = summarize_certification(report.predictions);
  return report;
}

CertifyReport certify_set(const ModelSpec& spec, const Parameters& params, const Dataset& data,
                          const CertifyConfig& config, std::size_t workers) {
  check_parameters(spec, params);
  return certify_set(model_classifier(spec, params), data, config, workers);
}

}  // namespace certiprob
