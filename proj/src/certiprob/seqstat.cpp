#include "certiprob/seqstat.hpp"

#include <algorithm>
#include <cmath>

#include "certiprob/error.hpp"

namespace certiprob {
namespace {

void check_args(std::uint64_t v, std::uint64_t w, double p0) {
  require(p0 > 0.0 && p0 < 1.0, ErrorCode::kInvalidArgument, "binomial test: p0 must lie in (0, 1)");
  require(v <= w, ErrorCode::kInvalidArgument, "binomial test: v must not exceed w");
}

long double log_pmf(std::uint64_t i, std::uint64_t w, long double p) {
  const auto li = static_cast<long double>(i);
  const auto lw = static_cast<long double>(w);
  return std::lgamma(lw + 1.0L) - std::lgamma(li + 1.0L) - std::lgamma(lw - li + 1.0L) + li * std::log(p) +
         (lw - li) * std::log1p(-p);
}

// Sum of pmf(i) for i = v..w, with v at or above the mean so terms decrease.
// Stops once the geometric bound on the remainder is negligible.
long double sum_upper(std::uint64_t v, std::uint64_t w, long double p) {
  const long double odds = p / (1.0L - p);
  long double term = std::exp(log_pmf(v, w, p));
  long double total = 0.0L;
  for (std::uint64_t i = v; i <= w; ++i) {
    total += term;
    if (i == w) break;
    const long double r = static_cast<long double>(w - i) / static_cast<long double>(i + 1) * odds;
    term *= r;
    if (r < 1.0L && term * r / (1.0L - r) <= total * 1e-21L) {
      total += term;
      break;
    }
  }
  return total;
}

// Sum of pmf(i) for i = 0..v, with v at or below the mean so terms decrease
// walking down.
long double sum_lower(std::uint64_t v, std::uint64_t w, long double p) {
  const long double odds = (1.0L - p) / p;
  long double term = std::exp(log_pmf(v, w, p));
  long double total = 0.0L;
  for (std::uint64_t i = v;; --i) {
    total += term;
    if (i == 0) break;
    const long double r = static_cast<long double>(i) / static_cast<long double>(w - i + 1) * odds;
    term *= r;
    if (r < 1.0L && term * r / (1.0L - r) <= total * 1e-21L) {
      total += term;
      break;
    }
  }
  return total;
}

double clamp01(long double x) { return static_cast<double>(std::clamp(x, 0.0L, 1.0L)); }

}  // namespace

double binom_tail_right(std::uint64_t v, std::uint64_t w, double p0) {
  check_args(v, w, p0);
  if (v == 0) return 1.0;
  const long double p = p0;
  const long double mean = static_cast<long double>(w) * p;
  if (static_cast<long double>(v) >= mean) return clamp01(sum_upper(v, w, p));
  return clamp01(1.0L - sum_lower(v - 1, w, p));
}

double binom_tail_left(std::uint64_t v, std::uint64_t w, double p0) {
  check_args(v, w, p0);
  if (v == w) return 1.0;
  const long double p = p0;
  const long double mean = static_cast<long double>(w) * p;
  if (static_cast<long double>(v) <= mean) return clamp01(sum_lower(v, w, p));
  return clamp01(1.0L - sum_upper(v + 1, w, p));
}

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kRunning: return "running";
    case Verdict::kCertified: return "certified";
    case Verdict::kNotCertified: return "not_certified";
    case Verdict::kUndecided: return "undecided";
  }
  return "?";
}

Verdict verdict_from_name(const std::string& name) {
  for (auto v : {Verdict::kRunning, Verdict::kCertified, Verdict::kNotCertified, Verdict::kUndecided})
    if (verdict_name(v) == name) return v;
  throw Error(ErrorCode::kFormat, "unknown verdict '" + name + "'");
}

void SequentialConfig::validate() const {
  require(kappa > 0.0 && kappa < 1.0, ErrorCode::kConfig, "kappa must lie in (0, 1)");
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::kConfig, "alpha must lie in (0, 1)");
  require(w_min >= 1, ErrorCode::kConfig, "w_min must be >= 1");
  require(w_max >= w_min, ErrorCode::kConfig, "w_max must be >= w_min");
  require(test_every >= 1, ErrorCode::kConfig, "test_every must be >= 1");
}

void seq_update(SequentialTestState& state, int predicted_class, const SequentialConfig& config) {
  require(!state.stopped(), ErrorCode::kState, "seq_update after the test has stopped");
  ++state.counts[predicted_class];
  ++state.w;
  state.v = 0;
  for (const auto& [cls, count] : state.counts)
    if (count > state.v) {
      state.v = count;
      state.majority = cls;
    }

  const bool at_cap = state.w >= config.w_max;
  const bool on_cadence = state.w >= config.w_min && (state.w - config.w_min) % config.test_every == 0;
  if (!on_cadence && !at_cap) return;

  const double p0 = 1.0 - config.kappa;
  state.p_left = binom_tail_left(state.v, state.w, p0);
  state.p_right = binom_tail_right(state.v, state.w, p0);
  if (state.w >= config.w_min) {
    if (state.p_left < config.alpha) {
      state.verdict = Verdict::kNotCertified;
      return;
    }
    if (state.p_right < config.alpha) {
      state.verdict = Verdict::kCertified;
      return;
    }
  }
  if (at_cap) state.verdict = Verdict::kUndecided;
}

}  // namespace certiprob
