#pragma once

#include "certiprob/model.hpp"

namespace certiprob {

/// theta <- theta - lr * (g + weight_decay * theta)
void sgd_step(Parameters& params, const Parameters& grads, double lr, double weight_decay);

/// Running averages for Adadelta, one pair of tensors per parameter tensor.
struct AdadeltaState {
  std::vector<Tensor> sq_grad;
  std::vector<Tensor> sq_delta;

  static AdadeltaState for_params(const Parameters& params);
  bool initialized() const { return !sq_grad.empty(); }
};

/// Adadelta update:
///   E[g^2] <- rho E[g^2] + (1 - rho) g^2
///   delta  <- sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
///   E[dx^2] <- rho E[dx^2] + (1 - rho) delta^2
///   theta  <- theta - lr * delta
void adadelta_step(Parameters& params, const Parameters& grads, AdadeltaState& state, double rho, double eps,
                   double lr);

/// Step decay: the rate is multiplied by `factor` once each milestone epoch has
/// completed. Epochs are 1-based, so milestone 55 first affects epoch 56.
double milestone_lr(double base_lr, std::span<const int> milestones, double factor, int epoch);

}  // namespace certiprob
