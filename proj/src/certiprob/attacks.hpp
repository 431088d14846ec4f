#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "certiprob/certify.hpp"
#include "certiprob/dataio.hpp"
#include "certiprob/model.hpp"
#include "certiprob/rng.hpp"

namespace certiprob {

enum class AttackKind { kFgsm, kPgdLinf, kPgdL2, kGaussian };

std::string attack_kind_name(AttackKind kind);
AttackKind attack_kind_from_name(const std::string& name);

struct AttackConfig {
  AttackKind kind = AttackKind::kPgdLinf;
  double epsilon = 0.1;
  int steps = 10;
  double step_size = 0.0;  // 0 selects 2.5 * epsilon / steps
  double noise_std = 0.1;  // gaussian
  bool random_start = true;
  std::uint64_t seed = 0;

  void validate() const;
  double effective_step() const { return step_size > 0.0 ? step_size : 2.5 * epsilon / steps; }
};

/// Gradient of the cross-entropy loss with respect to a single input x.
Tensor input_gradient(const ModelSpec& spec, const Parameters& params, const Tensor& x, int label,
                      double* loss = nullptr);

/// x' = clip01(x + epsilon * sign(grad_x loss)).
Tensor fgsm(const ModelSpec& spec, const Parameters& params, const Tensor& x, int label, double epsilon);

/// Projected gradient ascent on the loss within the L-inf or L2 ball, clipped
/// to [0,1] after every step. When `loss_trace` is given it receives the loss
/// at the start point and after each step.
Tensor pgd(const ModelSpec& spec, const Parameters& params, const Tensor& x, int label, const AttackConfig& config,
           Rng& rng, std::vector<double>* loss_trace = nullptr);

/// x' = clip01(x + N(0, std^2)).
Tensor gaussian_noise(const Tensor& x, double std, Rng& rng);

Tensor run_attack(const ModelSpec& spec, const Parameters& params, const Tensor& x, int label,
                  const AttackConfig& config, Rng& rng);

enum class InferenceMode { kPlain, kCertified };

std::string inference_mode_name(InferenceMode mode);

struct AttackOutcome {
  std::size_t id = 0;
  int label = -1;
  int prediction = -1;  // plain or majority prediction on the attacked input
};

struct DefenceResult {
  AttackConfig attack;
  InferenceMode inference = InferenceMode::kPlain;
  double rate = 0.0;
  std::vector<AttackOutcome> outcomes;
};

/// Fraction of inputs still predicted correctly after the attack. Certified
/// inference takes the majority vote of the sequential certification on the
/// attacked input; `certify` must then be non-null.
DefenceResult defence_success_rate(const ModelSpec& spec, const Parameters& params, const Dataset& data,
                                   const AttackConfig& attack, InferenceMode inference,
                                   const CertifyConfig* certify = nullptr, std::size_t workers = 1);

}  // namespace certiprob
