#include "certiprob/optim.hpp"

#include <cmath>

#include "certiprob/error.hpp"

namespace certiprob {
namespace {

void check_pair(const Parameters& params, const Parameters& grads) {
  require(params.tensors.size() == grads.tensors.size(), ErrorCode::kShapeMismatch,
          "optimizer: parameter and gradient counts differ");
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    require(params.tensors[i].shape() == grads.tensors[i].shape(), ErrorCode::kShapeMismatch,
            "optimizer: gradient " + std::to_string(i) + " has shape " + shape_str(grads.tensors[i].shape()) +
                ", parameter has " + shape_str(params.tensors[i].shape()));
}

}  // namespace

void sgd_step(Parameters& params, const Parameters& grads, double lr, double weight_decay) {
  require(lr > 0.0, ErrorCode::kInvalidArgument, "sgd: lr must be positive");
  require(weight_decay >= 0.0, ErrorCode::kInvalidArgument, "sgd: weight_decay must be non-negative");
  check_pair(params, grads);
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    auto th = params.tensors[i].data();
    auto g = grads.tensors[i].data();
    for (std::size_t k = 0; k < th.size(); ++k) th[k] -= lr * (g[k] + weight_decay * th[k]);
  }
}

AdadeltaState AdadeltaState::for_params(const Parameters& params) {
  AdadeltaState s;
  for (const Tensor& t : params.tensors) {
    s.sq_grad.emplace_back(t.shape());
    s.sq_delta.emplace_back(t.shape());
  }
  return s;
}

void adadelta_step(Parameters& params, const Parameters& grads, AdadeltaState& state, double rho, double eps,
                   double lr) {
  require(rho > 0.0 && rho < 1.0, ErrorCode::kInvalidArgument, "adadelta: rho must lie in (0, 1)");
  require(eps > 0.0, ErrorCode::kInvalidArgument, "adadelta: eps must be positive");
  require(lr > 0.0, ErrorCode::kInvalidArgument, "adadelta: lr must be positive");
  require(state.initialized() && state.sq_grad.size() == params.tensors.size(), ErrorCode::kState,
          "adadelta: optimizer state is not initialized for these parameters");
  check_pair(params, grads);
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    auto th = params.tensors[i].data();
    auto g = grads.tensors[i].data();
    auto eg = state.sq_grad[i].data();
    auto ed = state.sq_delta[i].data();
    require(eg.size() == th.size(), ErrorCode::kState, "adadelta: state shape mismatch");
    for (std::size_t k = 0; k < th.size(); ++k) {
      eg[k] = rho * eg[k] + (1.0 - rho) * g[k] * g[k];
      const double delta = std::sqrt(ed[k] + eps) / std::sqrt(eg[k] + eps) * g[k];
      ed[k] = rho * ed[k] + (1.0 - rho) * delta * delta;
      th[k] -= lr * delta;
    }
  }
}

double milestone_lr(double base_lr, std::span<const int> milestones, double factor, int epoch) {
  double lr = base_lr;
  for (int m : milestones)
    if (epoch > m) lr *= factor;
  return lr;
}

}  // namespace certiprob
