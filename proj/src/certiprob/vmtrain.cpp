#include "certiprob/vmtrain.hpp"

#include <chrono>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "certiprob/error.hpp"
#include "certiprob/optim.hpp"

namespace certiprob {

std::string sigma_mode_name(SigmaMode mode) {
  return mode == SigmaMode::kPaperLiteral ? "paper_literal" : "sample_sd";
}

SigmaMode sigma_mode_from_name(const std::string& name) {
  if (name == "paper_literal") return SigmaMode::kPaperLiteral;
  if (name == "sample_sd") return SigmaMode::kSampleSd;
  throw Error(ErrorCode::kConfig, "unknown sigma_mode '" + name + "'");
}

namespace {

double spread(std::span<const double> u, double mu, SigmaMode mode) {
  const std::size_t n = u.size();
  if (n == 1) return 0.0;
  if (mode == SigmaMode::kPaperLiteral) {
    double s = 0.0;
    for (double a : u)
      for (double b : u) s += (a - b) * (a - b);
    return std::sqrt(s / static_cast<double>(n));
  }
  double s = 0.0;
  for (double v : u) s += (v - mu) * (v - mu);
  return std::sqrt(s / static_cast<double>(n - 1));
}

}  // namespace

LossStats loss_stats(std::span<const double> u, SigmaMode mode) {
  require(!u.empty(), ErrorCode::kInvalidArgument, "loss_stats: empty loss vector");
  LossStats st;
  st.per_sample.assign(u.begin(), u.end());
  st.mu = std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(u.size());
  st.sigma = spread(u, st.mu, mode);
  return st;
}

namespace ops {

NodeId group_spread(Tape& t, NodeId u, std::size_t group, SigmaMode mode) {
  const Tensor& uv = t.value(u);
  require(group > 0 && uv.size() % group == 0, ErrorCode::kShapeMismatch,
          "group_spread: size not divisible by group");
  const std::size_t m = uv.size() / group;
  Tensor sig(Shape{m});
  Tensor mus(Shape{m});
  for (std::size_t i = 0; i < m; ++i) {
    auto g = uv.data().subspan(i * group, group);
    mus[i] = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(group);
    sig[i] = spread(g, mus[i], mode);
  }
  const double denom = mode == SigmaMode::kPaperLiteral ? 0.5 : static_cast<double>(group > 1 ? group - 1 : 1);
  Tensor sig_copy = sig;
  return t.push(std::move(sig), {u},
                [u, group, denom, mus = std::move(mus), sig = std::move(sig_copy)](const Tensor& g, Tape& tp) {
                  // paper_literal: d sigma / d u_j = 2 (u_j - mu) / sigma
                  // sample_sd:     d sigma / d u_j = (u_j - mu) / ((n - 1) sigma)
                  Tensor* gu = tp.grad_acc(u);
                  const Tensor& uv2 = tp.value(u);
                  for (std::size_t i = 0; i < sig.size(); ++i) {
                    if (sig[i] == 0.0) continue;
                    for (std::size_t j = 0; j < group; ++j) {
                      const std::size_t k = i * group + j;
                      (*gu)[k] += g[i] * (uv2[k] - mus[i]) / (denom * sig[i]);
                    }
                  }
                });
}

}  // namespace ops

void TrainConfig::validate() const {
  vicinity.validate();
  require(sample_size >= 1, ErrorCode::kConfig, "train.sample_size must be >= 1");
  require(batch_size >= 1, ErrorCode::kConfig, "train.batch_size must be >= 1");
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorCode::kConfig, "train.lambda must be >= 0");
  require(epochs >= 1, ErrorCode::kConfig, "train.epochs must be >= 1");
  require(optimizer.lr > 0.0, ErrorCode::kConfig, "optimizer.lr must be positive");
  if (optimizer.kind == OptimizerKind::kSgd) {
    require(optimizer.weight_decay >= 0.0, ErrorCode::kConfig, "optimizer.weight_decay must be >= 0");
  } else {
    require(optimizer.rho > 0.0 && optimizer.rho < 1.0, ErrorCode::kConfig, "optimizer.rho must lie in (0,1)");
    require(optimizer.eps > 0.0, ErrorCode::kConfig, "optimizer.eps must be positive");
  }
}

std::string EpochLog::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["mean_mu"] = mean_mu;
  j["mean_sigma"] = mean_sigma;
  j["train_acc"] = train_acc;
  j["lr"] = lr;
  j["wall_ms"] = wall_ms;
  return j.dump();
}

ObjectiveNodes minibatch_objective(Tape& tape, const ModelSpec& spec, std::span<const NodeId> param_nodes,
                                   const Tensor& samples, std::span<const int> group_labels, std::size_t group,
                                   double lambda, SigmaMode mode) {
  require(samples.dim(0) == group_labels.size() * group, ErrorCode::kShapeMismatch,
          "minibatch_objective: sample count != groups * group size");
  std::vector<int> labels;
  labels.reserve(samples.dim(0));
  for (int l : group_labels) labels.insert(labels.end(), group, l);

  const NodeId input = tape.leaf(samples, false);
  const NodeId logits = forward_on_tape(tape, spec, param_nodes, input);
  const NodeId u = ops::cross_entropy(tape, logits, labels);
  NodeId per_example = ops::group_mean(tape, u, group);
  if (lambda != 0.0) {
    const NodeId sig = ops::group_spread(tape, u, group, mode);
    per_example = ops::add(tape, per_example, ops::scale(tape, sig, lambda));
  }
  return {ops::mean(tape, per_example), u, logits};
}

NodeId vicinity_objective(Tape& tape, const ModelSpec& spec, std::span<const NodeId> param_nodes,
                          const Tensor& x, int label, const TrainConfig& config, Rng& rng) {
  const PerturbationBatch pb = sample_vicinity(config.vicinity, x, config.sample_size, rng);
  const int labels[1] = {label};
  return minibatch_objective(tape, spec, param_nodes, pb.samples, labels, config.sample_size, config.lambda,
                             config.sigma_mode)
      .objective;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

TrainResult train(const ModelSpec& spec, const Dataset& data, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  return train_from(spec, he_init(spec, TrainStreams::init(config.seed)), data, config, on_epoch);
}

TrainResult train_from(const ModelSpec& spec, Parameters init, const Dataset& data, const TrainConfig& config,
                       const EpochCallback& on_epoch) {
  config.validate();
  spec.validate();
  check_parameters(spec, init);
  require(data.size() > 0, ErrorCode::kInvalidArgument, "train: empty dataset");
  require(data.sample_shape() == spec.input_shape, ErrorCode::kShapeMismatch,
          "train: dataset sample shape " + shape_str(data.sample_shape()) + " does not match model input " +
              shape_str(spec.input_shape));

  TrainResult result{std::move(init), {}};
  Parameters& params = result.params;
  AdadeltaState adadelta = AdadeltaState::for_params(params);
  Rng batch_rng(TrainStreams::batches(config.seed));
  Rng perturb_rng(TrainStreams::perturb(config.seed));

  const std::size_t k = data.size();
  const std::size_t m = config.batch_size;
  const std::size_t n = config.sample_size;
  const std::size_t dim = shape_numel(spec.input_shape);
  std::size_t step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& opt = config.optimizer;
    const double lr = opt.kind == OptimizerKind::kSgd ? milestone_lr(opt.lr, opt.milestones, opt.decay_factor, epoch)
                                                      : opt.lr;
    const std::vector<std::size_t> order = shuffled_indices(k, batch_rng);
    double sum_mu = 0.0, sum_sigma = 0.0;
    std::size_t correct = 0;

    for (std::size_t start = 0; start < k; start += m, ++step) {
      const std::size_t bs = std::min(m, k - start);
      Shape sshape{bs * n};
      sshape.insert(sshape.end(), spec.input_shape.begin(), spec.input_shape.end());
      Tensor samples(sshape);
      std::vector<int> labels(bs);
      for (std::size_t i = 0; i < bs; ++i) {
        const std::size_t ex = order[start + i];
        const PerturbationBatch pb = sample_vicinity(config.vicinity, data.input(ex), n, perturb_rng);
        std::copy(pb.samples.data().begin(), pb.samples.data().end(),
                  samples.data().begin() + static_cast<std::ptrdiff_t>(i * n * dim));
        labels[i] = data.labels[ex];
      }

      Tape tape;
      const auto pn = bind_parameters(tape, params);
      const ObjectiveNodes nodes =
          minibatch_objective(tape, spec, pn, samples, labels, n, config.lambda, config.sigma_mode);
      const Tensor& u = tape.value(nodes.losses);
      for (std::size_t i = 0; i < bs; ++i) {
        auto group = u.data().subspan(i * n, n);
        for (double v : group)
          require(std::isfinite(v), ErrorCode::kNumeric,
                  "non-finite loss at step " + std::to_string(step) + ", example " +
                      std::to_string(order[start + i]));
        const LossStats st = loss_stats(group, config.sigma_mode);
        sum_mu += st.mu;
        sum_sigma += st.sigma;
      }
      require(std::isfinite(tape.value(nodes.objective).item()), ErrorCode::kNumeric,
              "non-finite objective at step " + std::to_string(step));
      const std::vector<int> pred = argmax_rows(tape.value(nodes.logits));
      for (std::size_t r = 0; r < pred.size(); ++r)
        if (pred[r] == labels[r / n]) ++correct;

      const Parameters grads = backward(tape, nodes.objective, pn);
      if (opt.kind == OptimizerKind::kSgd)
        sgd_step(params, grads, lr, opt.weight_decay);
      else
        adadelta_step(params, grads, adadelta, opt.rho, opt.eps, lr);
    }

    EpochLog log;
    log.epoch = epoch;
    log.mean_mu = sum_mu / static_cast<double>(k);
    log.mean_sigma = sum_sigma / static_cast<double>(k);
    log.train_acc = static_cast<double>(correct) / static_cast<double>(k * n);
    log.lr = lr;
    log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(log);
    if (on_epoch) on_epoch(log, params);
  }
  return result;
}

}  // namespace certiprob
