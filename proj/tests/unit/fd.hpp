#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "certiprob/model.hpp"

namespace fdcheck {

struct Mismatch {
  std::size_t tensor = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central differences of f over every parameter entry, compared with `grads`
/// at relative tolerance `rel` and absolute floor `abs_floor`.
/// Returns the number of mismatches; the first is reported through `first`.
inline std::size_t compare(certiprob::Parameters params, const certiprob::Parameters& grads,
                           const std::function<double(const certiprob::Parameters&)>& f, double step = 1e-5,
                           double rel = 1e-4, double abs_floor = 1e-7, Mismatch* first = nullptr) {
  std::size_t bad = 0;
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    for (std::size_t i = 0; i < params.tensors[t].size(); ++i) {
      const double orig = params.tensors[t][i];
      params.tensors[t][i] = orig + step;
      const double up = f(params);
      params.tensors[t][i] = orig - step;
      const double down = f(params);
      params.tensors[t][i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = grads.tensors[t][i];
      const double diff = std::abs(numeric - analytic);
      if (diff > abs_floor && diff > rel * std::max(std::abs(numeric), std::abs(analytic))) {
        if (bad == 0 && first) *first = {t, i, analytic, numeric};
        ++bad;
      }
    }
  }
  return bad;
}

/// Distance of a forward pass from the nonsmooth points of the network: the
/// smallest |pre-activation| at a ReLU and the smallest gap between the two
/// largest entries of a max-pool window. Central differences are only
/// meaningful when this is well above the step times the input scale.
inline double kink_margin(const certiprob::ModelSpec& spec, const certiprob::Parameters& params,
                          const certiprob::Tensor& batch) {
  using namespace certiprob;
  Tape t(false);
  std::vector<NodeId> pn;
  for (const auto& p : params.tensors) pn.push_back(t.leaf(p, false));
  NodeId cur = t.leaf(batch, false);
  std::size_t p = 0;
  double margin = INFINITY;
  for (const Layer& l : spec.layers) {
    const Tensor v = t.value(cur);
    switch (l.kind) {
      case LayerKind::kDense:
        cur = ops::dense(t, cur, pn[p], pn[p + 1]);
        p += 2;
        break;
      case LayerKind::kConv2d:
        cur = ops::conv2d(t, cur, pn[p], pn[p + 1]);
        p += 2;
        break;
      case LayerKind::kRelu:
        for (double a : v.storage()) margin = std::min(margin, std::abs(a));
        cur = ops::relu(t, cur);
        break;
      case LayerKind::kMaxPool2: {
        const std::size_t b = v.dim(0), c = v.dim(1), h = v.dim(2), w = v.dim(3);
        for (std::size_t i = 0; i < b * c; ++i)
          for (std::size_t r = 0; r + 1 < h; r += 2)
            for (std::size_t q = 0; q + 1 < w; q += 2) {
              double win[4] = {v[(i * h + r) * w + q], v[(i * h + r) * w + q + 1], v[(i * h + r + 1) * w + q],
                               v[(i * h + r + 1) * w + q + 1]};
              std::sort(win, win + 4);
              // A window of clamped ReLU zeros is flat, not a kink.
              if (win[3] != 0.0) margin = std::min(margin, win[3] - win[2]);
            }
        cur = ops::maxpool2(t, cur);
        break;
      }
      case LayerKind::kFlatten:
        cur = ops::reshape(t, cur, {v.dim(0), v.size() / v.dim(0)});
        break;
    }
  }
  return margin;
}

}  // namespace fdcheck
