#include "certiprob/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "certiprob/error.hpp"
#include "certiprob/parallel.hpp"
#include "certiprob/perturbation.hpp"

namespace certiprob {
namespace {

Tensor as_batch(const Tensor& x) {
  Shape s{1};
  s.insert(s.end(), x.shape().begin(), x.shape().end());
  return x.reshaped(std::move(s));
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double d : v) s += d * d;
  return std::sqrt(s);
}

void project(Tensor& adv, const Tensor& x, const AttackConfig& c) {
  auto a = adv.data();
  if (c.kind == AttackKind::kPgdL2) {
    std::vector<double> delta(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) delta[i] = a[i] - x[i];
    const double norm = l2_norm(delta);
    if (norm > c.epsilon) {
      const double f = c.epsilon / norm;
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = x[i] + delta[i] * f;
    }
  } else {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::clamp(a[i], x[i] - c.epsilon, x[i] + c.epsilon);
  }
  for (double& v : a) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace

std::string attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::kFgsm: return "fgsm";
    case AttackKind::kPgdLinf: return "pgd_linf";
    case AttackKind::kPgdL2: return "pgd_l2";
    case AttackKind::kGaussian: return "gaussian";
  }
  return "?";
}

AttackKind attack_kind_from_name(const std::string& name) {
  for (auto k : {AttackKind::kFgsm, AttackKind::kPgdLinf, AttackKind::kPgdL2, AttackKind::kGaussian})
    if (attack_kind_name(k) == name) return k;
  throw Error(ErrorCode::kConfig, "unknown attack kind '" + name + "'");
}

std::string inference_mode_name(InferenceMode mode) { return mode == InferenceMode::kPlain ? "plain" : "certified"; }

void AttackConfig::validate() const {
  require(epsilon >= 0.0, ErrorCode::kConfig, "attack.epsilon must be >= 0");
  require(steps >= 1, ErrorCode::kConfig, "attack.steps must be >= 1");
  require(step_size >= 0.0, ErrorCode::kConfig, "attack.step_size must be >= 0");
  require(noise_std >= 0.0, ErrorCode::kConfig, "attack.noise_std must be >= 0");
}

Tensor input_gradient(const ModelSpec& spec, const Parameters& params, const Tensor& x, int label, double* loss) {
  check_parameters(spec, params);
  Tape tape;
  const auto pn = bind_parameters(tape, params, false);
  const NodeId in = tape.leaf(as_batch(x), true);
  const NodeId logits = forward_on_tape(tape, spec, pn, in);
  const int labels[1] = {label};
  const NodeId u = ops::sum(tape, ops::cross_entropy(tape, logits, labels));
  if (loss) *loss = tape.value(u).item();
  tape.backward(u);
  require(tape.requires_grad(in), ErrorCode::kState, "input gradient unavailable");
  return tape.grad(in).reshaped(x.shape());
}

Tensor fgsm(const ModelSpec& spec, const Parameters& params, const Tensor& x, int label, double epsilon) {
  require(epsilon >= 0.0, ErrorCode::kInvalidArgument, "fgsm: epsilon must be >= 0");
  const Tensor g = input_gradient(spec, params, x, label);
  Tensor adv = x;
  for (std::size_t i = 0; i < adv.size(); ++i) {
    const double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
    adv[i] = std::clamp(x[i] + epsilon * s, 0.0, 1.0);
  }
  return adv;
}

Tensor pgd(const ModelSpec& spec, const Parameters& params, const Tensor& x, int label, const AttackConfig& config,
           Rng& rng, std::vector<double>* loss_trace) {
  config.validate();
  require(config.kind == AttackKind::kPgdLinf || config.kind == AttackKind::kPgdL2, ErrorCode::kInvalidArgument,
          "pgd: attack kind must be pgd_linf or pgd_l2");
  Tensor adv = x;
  if (config.random_start) {
    const PerturbationBatch start = config.kind == AttackKind::kPgdL2 ? sample_l2(x, config.epsilon, 1, rng, true)
                                                                      : sample_linf(x, config.epsilon, 1, rng, true);
    adv = start.samples.reshaped(x.shape());
  }
  const double step = config.effective_step();
  for (int it = 0; it < config.steps; ++it) {
    double loss = 0.0;
    const Tensor g = input_gradient(spec, params, adv, label, &loss);
    if (loss_trace) loss_trace->push_back(loss);
    if (config.kind == AttackKind::kPgdL2) {
      const double norm = l2_norm(g.data());
      if (norm > 0.0)
        for (std::size_t i = 0; i < adv.size(); ++i) adv[i] += step * g[i] / norm;
    } else {
      for (std::size_t i = 0; i < adv.size(); ++i) adv[i] += step * (g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0));
    }
    project(adv, x, config);
  }
  if (loss_trace) {
    double loss = 0.0;
    input_gradient(spec, params, adv, label, &loss);
    loss_trace->push_back(loss);
  }
  return adv;
}

Tensor gaussian_noise(const Tensor& x, double std, Rng& rng) {
  Tensor adv = x;
  for (double& v : adv.data()) v = std::clamp(v + std * rng.normal(), 0.0, 1.0);
  return adv;
}

Tensor run_attack(const ModelSpec& spec, const Parameters& params, const Tensor& x, int label,
                  const AttackConfig& config, Rng& rng) {
  switch (config.kind) {
    case AttackKind::kFgsm: return fgsm(spec, params, x, label, config.epsilon);
    case AttackKind::kPgdLinf:
    case AttackKind::kPgdL2: return pgd(spec, params, x, label, config, rng);
    case AttackKind::kGaussian: return gaussian_noise(x, config.noise_std, rng);
  }
  throw Error(ErrorCode::kInvalidArgument, "unsupported attack kind");
}

DefenceResult defence_success_rate(const ModelSpec& spec, const Parameters& params, const Dataset& data,
                                   const AttackConfig& attack, InferenceMode inference,
                                   const CertifyConfig* certify, std::size_t workers) {
  check_parameters(spec, params);
  require(data.size() > 0, ErrorCode::kInvalidArgument, "defence_success_rate: empty dataset");
  require(inference == InferenceMode::kPlain || certify != nullptr, ErrorCode::kInvalidArgument,
          "certified inference needs a certification config");
  DefenceResult res{attack, inference, 0.0, std::vector<AttackOutcome>(data.size())};
  const Classifier classify = model_classifier(spec, params);
  parallel_for(data.size(), workers, [&](std::size_t i) {
    const Tensor x = data.input(i);
    Rng rng(input_stream_seed(attack.seed, x));
    const Tensor adv = run_attack(spec, params, x, data.labels[i], attack, rng);
    int pred;
    if (inference == InferenceMode::kPlain) {
      pred = classify(as_batch(adv)).at(0);
    } else {
      Rng crng(input_stream_seed(certify->seed, adv));
      pred = certify_one(classify, adv, *certify, crng).predicted_class;
    }
    res.outcomes[i] = {i, data.labels[i], pred};
  });
  std::size_t ok = 0;
  for (const auto& o : res.outcomes) ok += o.prediction == o.label;
  res.rate = static_cast<double>(ok) / static_cast<double>(data.size());
  return res;
}

}  // namespace certiprob
