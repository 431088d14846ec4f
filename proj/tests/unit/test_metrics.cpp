#include <doctest.h>

#include <algorithm>
#include <json.hpp>

#include "certiprob/error.hpp"
#include "certiprob/metrics.hpp"
#include "certiprob/rng.hpp"

using namespace certiprob;

namespace {

EvalRecord rec(int truth, int plain, int majority, Verdict v, std::uint64_t used = 1) {
  static std::size_t next = 0;
  return {next++, truth, plain, majority, v, used};
}

std::vector<EvalRecord> random_records(Rng& r, std::size_t n) {
  const Verdict vs[] = {Verdict::kCertified, Verdict::kNotCertified, Verdict::kUndecided};
  std::vector<EvalRecord> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({i, static_cast<int>(r.below(3)), static_cast<int>(r.below(3)), static_cast<int>(r.below(3)),
                   vs[r.below(3)], 30 + r.below(500)});
  return out;
}

}  // namespace

TEST_CASE("accuracy examples") {
  const std::vector<EvalRecord> all_ok = {rec(1, 1, 1, Verdict::kCertified), rec(0, 0, 0, Verdict::kCertified)};
  const std::vector<EvalRecord> all_bad = {rec(1, 0, 0, Verdict::kCertified), rec(0, 1, 1, Verdict::kCertified)};
  CHECK(standard_accuracy(all_ok) == 1.0);
  CHECK(standard_accuracy(all_bad) == 0.0);
  const std::vector<EvalRecord> three = {rec(1, 0, 1, Verdict::kCertified), rec(2, 2, 2, Verdict::kCertified),
                                         rec(0, 0, 0, Verdict::kCertified), rec(0, 0, 1, Verdict::kCertified)};
  CHECK(standard_accuracy(three) == 0.75);
  CHECK(standard_accuracy(three, PredictionSource::kPlain) == 0.75);
}

TEST_CASE("certification rate examples") {
  const std::vector<EvalRecord> r = {rec(0, 0, 0, Verdict::kCertified), rec(0, 0, 0, Verdict::kNotCertified),
                                     rec(0, 0, 0, Verdict::kUndecided), rec(0, 0, 0, Verdict::kCertified)};
  CHECK(certified_robustness_rate(r) == 0.5);
  const std::vector<EvalRecord> u = {rec(0, 0, 0, Verdict::kUndecided), rec(1, 1, 1, Verdict::kUndecided)};
  CHECK(certified_robustness_rate(u) == 0.0);
  CHECK(certified_robust_accuracy(u) == 0.0);
  const std::vector<EvalRecord> wrong = {rec(0, 1, 1, Verdict::kCertified), rec(1, 1, 1, Verdict::kCertified)};
  CHECK(certified_robust_accuracy(wrong) == 0.5);
}

TEST_CASE("empty input throws") {
  const std::vector<EvalRecord> none;
  CHECK_THROWS_AS(standard_accuracy(none), Error);
  CHECK_THROWS_AS(certified_robustness_rate(none), Error);
  CHECK_THROWS_AS(certified_robust_accuracy(none), Error);
}

TEST_CASE("bounds, independent fold and permutation invariance") {
  Rng r(12);
  for (int t = 0; t < 200; ++t) {
    auto recs = random_records(r, 1 + r.below(60));
    const double acc = standard_accuracy(recs);
    const double rate = certified_robustness_rate(recs);
    const double cra = certified_robust_accuracy(recs);
    for (double m : {acc, rate, cra}) {
      CHECK(m >= 0.0);
      CHECK(m <= 1.0);
    }
    CHECK(cra <= rate);
    CHECK(cra <= acc);

    double fold = 0;
    for (const auto& e : recs)
      fold += (e.verdict == Verdict::kCertified ? 1.0 : 0.0) * (e.majority_pred == e.ground_truth ? 1.0 : 0.0);
    CHECK(cra == fold / static_cast<double>(recs.size()));

    const Summary before = summarize(recs, {});
    for (std::size_t i = recs.size(); i > 1; --i) std::swap(recs[i - 1], recs[r.below(i)]);
    const Summary after = summarize(recs, {});
    CHECK(before.to_json() == after.to_json());
  }
}

TEST_CASE("summary serialization") {
  const std::vector<EvalRecord> r = {rec(0, 0, 0, Verdict::kCertified, 459), rec(1, 0, 1, Verdict::kNotCertified, 31),
                                     rec(1, 1, 1, Verdict::kUndecided, 2000), rec(0, 0, 1, Verdict::kCertified, 500)};
  const Summary plain = summarize(r, {});
  const auto j = nlohmann::ordered_json::parse(plain.to_json());
  CHECK_FALSE(j.contains("defence"));
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"count", "standard_accuracy", "plain_accuracy", "certified_robustness_rate",
                                         "certified_robust_accuracy", "mean_samples", "median_samples"});
  CHECK(j["count"] == 4);
  CHECK(j["standard_accuracy"] == 0.75);
  CHECK(j["plain_accuracy"] == 0.75);
  CHECK(j["certified_robustness_rate"] == 0.5);
  CHECK(j["certified_robust_accuracy"] == 0.25);
  CHECK(j["mean_samples"] == 747.5);
  CHECK(j["median_samples"] == 479.5);

  const Summary with = summarize(r, {{"pgd_linf", 0.1, "certified", 0.25}});
  const auto k = nlohmann::json::parse(with.to_json());
  REQUIRE(k["defence"].size() == 1);
  CHECK(k["defence"][0]["kind"] == "pgd_linf");
  CHECK(k["defence"][0]["rate"] == 0.25);

  CHECK(with.to_csv() ==
        "metric,value\n"
        "count,4\n"
        "standard_accuracy,0.75\n"
        "plain_accuracy,0.75\n"
        "certified_robustness_rate,0.5\n"
        "certified_robust_accuracy,0.25\n"
        "mean_samples,747.5\n"
        "median_samples,479.5\n"
        "defence:pgd_linf:0.1:certified,0.25\n");
}

TEST_CASE("records from certified predictions") {
  CertifiedPrediction p;
  p.id = 7;
  p.label = 2;
  p.plain_class = 1;
  p.predicted_class = 2;
  p.verdict = Verdict::kCertified;
  p.samples_used = 459;
  const EvalRecord e = EvalRecord::from_prediction(p);
  CHECK(e.id == 7);
  CHECK(e.ground_truth == 2);
  CHECK(e.plain_pred == 1);
  CHECK(e.majority_pred == 2);
  CHECK(e.verdict == Verdict::kCertified);
  CHECK(e.samples_used == 459);
}
