#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace certiprob {

/// P(Z >= v) for Z ~ Binomial(w, p0).
double binom_tail_right(std::uint64_t v, std::uint64_t w, double p0);

/// P(Z <= v) for Z ~ Binomial(w, p0).
double binom_tail_left(std::uint64_t v, std::uint64_t w, double p0);

enum class Verdict { kRunning, kCertified, kNotCertified, kUndecided };

std::string verdict_name(Verdict v);
Verdict verdict_from_name(const std::string& name);

/// Stopping rule parameters. The null proportion is p0 = 1 - kappa.
struct SequentialConfig {
  double kappa = 1e-2;
  double alpha = 1e-2;
  std::uint64_t w_min = 30;
  std::uint64_t w_max = 10000;
  std::uint64_t test_every = 1;

  void validate() const;
};

/// Class-count table and current verdict of one sequential certification.
struct SequentialTestState {
  std::map<int, std::uint64_t> counts;
  std::uint64_t w = 0;      // total observations
  std::uint64_t v = 0;      // count of the majority class
  int majority = -1;        // argmax of counts, ties to the lowest class
  double p_left = 1.0;      // P(Z <= v | p0) at the last evaluation
  double p_right = 1.0;     // P(Z >= v | p0) at the last evaluation
  Verdict verdict = Verdict::kRunning;

  bool stopped() const { return verdict != Verdict::kRunning; }
};

/// Records one prediction and applies the stopping rule.
///
/// The first occurrence of a class counts as 1. Once w >= w_min, and then on
/// every `test_every`-th observation, both tails are evaluated on the majority
/// count: p_left < alpha stops with kNotCertified, otherwise p_right < alpha
/// stops with kCertified. Reaching w_max without either stops with kUndecided.
/// Throws ErrorCode::kState if the state has already stopped.
void seq_update(SequentialTestState& state, int predicted_class, const SequentialConfig& config);

}  // namespace certiprob
