#include "certiprob/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "certiprob/error.hpp"

namespace certiprob {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

NodeId Tape::leaf(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), {}, {}, requires_grad && record_});
  return nodes_.size() - 1;
}

NodeId Tape::push(Tensor value, std::vector<NodeId> inputs, BackwardFn backward) {
  bool needs = false;
  for (NodeId in : inputs) {
    check(in);
    needs = needs || nodes_[in].requires_grad;
  }
  needs = needs && record_;
  if (!needs) {
    backward = nullptr;
    inputs.clear();
  }
  nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(backward), needs});
  return nodes_.size() - 1;
}

void Tape::check(NodeId id) const {
  require(id < nodes_.size(), ErrorCode::kInvalidArgument, "node " + std::to_string(id) + " is not on the tape");
}

const Tensor& Tape::value(NodeId id) const {
  check(id);
  return nodes_[id].value;
}

bool Tape::requires_grad(NodeId id) const {
  check(id);
  return nodes_[id].requires_grad;
}

Tensor Tape::grad(NodeId id) const {
  check(id);
  if (id < grads_.size() && grads_[id].size() == nodes_[id].value.size()) return grads_[id];
  return Tensor(nodes_[id].value.shape());
}

Tensor* Tape::grad_acc(NodeId id) {
  check(id);
  if (!nodes_[id].requires_grad) return nullptr;
  if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
  Tensor& g = grads_[id];
  if (g.size() != nodes_[id].value.size()) g = Tensor(nodes_[id].value.shape());
  return &g;
}

void Tape::backward(NodeId root) {
  check(root);
  require(nodes_[root].value.size() == 1, ErrorCode::kShapeMismatch,
          "backward root must be a scalar, got shape " + shape_str(nodes_[root].value.shape()));
  require(record_, ErrorCode::kState, "backward on a non-recording tape");
  grads_.assign(nodes_.size(), Tensor());
  if (!nodes_[root].requires_grad) return;
  grads_[root] = Tensor(nodes_[root].value.shape(), 1.0);
  for (NodeId id = root + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || grads_[id].size() == 0) continue;
    n.backward(grads_[id], *this);
  }
}

namespace ops {
namespace {

void expect(bool cond, const std::string& op, const std::string& detail) {
  require(cond, ErrorCode::kShapeMismatch, op + ": " + detail);
}

}  // namespace

NodeId dense(Tape& t, NodeId x, NodeId w, NodeId b) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  const Tensor& bv = t.value(b);
  expect(xv.rank() == 2 && wv.rank() == 2 && bv.rank() == 1, "dense", "expects x[B,in], w[out,in], b[out]");
  const std::size_t batch = xv.dim(0), in = xv.dim(1), out = wv.dim(0);
  expect(wv.dim(1) == in && bv.dim(0) == out, "dense",
         "input " + shape_str(xv.shape()) + " incompatible with weight " + shape_str(wv.shape()));

  Tensor y(Shape{batch, out});
  {
    ConstMatMap X(xv.data().data(), batch, in);
    ConstMatMap W(wv.data().data(), out, in);
    MatMap Y(y.data().data(), batch, out);
    Y.noalias() = X * W.transpose();
    Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bv.data().data(), out);
  }
  return t.push(std::move(y), {x, w, b}, [x, w, b, batch, in, out](const Tensor& g, Tape& tp) {
    ConstMatMap G(g.data().data(), batch, out);
    if (Tensor* gx = tp.grad_acc(x)) {
      ConstMatMap W(tp.value(w).data().data(), out, in);
      MatMap(gx->data().data(), batch, in).noalias() += G * W;
    }
    if (Tensor* gw = tp.grad_acc(w)) {
      ConstMatMap X(tp.value(x).data().data(), batch, in);
      MatMap(gw->data().data(), out, in).noalias() += G.transpose() * X;
    }
    if (Tensor* gb = tp.grad_acc(b)) {
      Eigen::Map<Eigen::RowVectorXd>(gb->data().data(), out) += G.colwise().sum();
    }
  });
}

NodeId conv2d(Tape& t, NodeId x, NodeId w, NodeId b) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  const Tensor& bv = t.value(b);
  expect(xv.rank() == 4 && wv.rank() == 4 && bv.rank() == 1, "conv2d", "expects x[B,C,H,W], w[O,C,k,k], b[O]");
  const std::size_t batch = xv.dim(0), ch = xv.dim(1), h = xv.dim(2), wd = xv.dim(3);
  const std::size_t oc = wv.dim(0), k = wv.dim(2);
  expect(wv.dim(1) == ch && wv.dim(3) == k && bv.dim(0) == oc, "conv2d",
         "input " + shape_str(xv.shape()) + " incompatible with kernel " + shape_str(wv.shape()));
  expect(h >= k && wd >= k, "conv2d", "kernel larger than input");
  const std::size_t oh = h - k + 1, ow = wd - k + 1;
  const std::size_t patch = ch * k * k, npix = oh * ow;

  // im2col per image: cols[patch, npix]; out = W[oc, patch] * cols + b.
  auto im2col = [=](const double* img, RowMatrix& cols) {
    cols.resize(static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(npix));
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t ki = 0; ki < k; ++ki)
        for (std::size_t kj = 0; kj < k; ++kj) {
          const std::size_t prow = (c * k + ki) * k + kj;
          for (std::size_t r = 0; r < oh; ++r)
            for (std::size_t q = 0; q < ow; ++q)
              cols(prow, r * ow + q) = img[(c * h + r + ki) * wd + q + kj];
        }
  };

  Tensor y(Shape{batch, oc, oh, ow});
  RowMatrix cols;
  ConstMatMap W(wv.data().data(), oc, patch);
  for (std::size_t n = 0; n < batch; ++n) {
    im2col(xv.data().data() + n * ch * h * wd, cols);
    MatMap Y(y.data().data() + n * oc * npix, oc, npix);
    Y.noalias() = W * cols;
    for (std::size_t o = 0; o < oc; ++o) Y.row(o).array() += bv[o];
  }

  return t.push(std::move(y), {x, w, b}, [=](const Tensor& g, Tape& tp) {
    Tensor* gx = tp.grad_acc(x);
    Tensor* gw = tp.grad_acc(w);
    Tensor* gb = tp.grad_acc(b);
    const Tensor& xin = tp.value(x);
    ConstMatMap Wm(tp.value(w).data().data(), oc, patch);
    RowMatrix cols, dcols;
    for (std::size_t n = 0; n < batch; ++n) {
      ConstMatMap G(g.data().data() + n * oc * npix, oc, npix);
      if (gb)
        for (std::size_t o = 0; o < oc; ++o) (*gb)[o] += G.row(o).sum();
      if (gw) {
        im2col(xin.data().data() + n * ch * h * wd, cols);
        MatMap(gw->data().data(), oc, patch).noalias() += G * cols.transpose();
      }
      if (gx) {
        dcols.noalias() = Wm.transpose() * G;
        double* dimg = gx->data().data() + n * ch * h * wd;
        for (std::size_t c = 0; c < ch; ++c)
          for (std::size_t ki = 0; ki < k; ++ki)
            for (std::size_t kj = 0; kj < k; ++kj) {
              const std::size_t prow = (c * k + ki) * k + kj;
              for (std::size_t r = 0; r < oh; ++r)
                for (std::size_t q = 0; q < ow; ++q) dimg[(c * h + r + ki) * wd + q + kj] += dcols(prow, r * ow + q);
            }
      }
    }
  });
}

NodeId relu(Tape& t, NodeId x) {
  Tensor y = t.value(x);
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return t.push(std::move(y), {x}, [x](const Tensor& g, Tape& tp) {
    Tensor* gx = tp.grad_acc(x);
    const Tensor& xv = tp.value(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) (*gx)[i] += g[i];
  });
}

NodeId maxpool2(Tape& t, NodeId x) {
  const Tensor& xv = t.value(x);
  expect(xv.rank() == 4, "maxpool2", "expects [B,C,H,W], got " + shape_str(xv.shape()));
  const std::size_t bc = xv.dim(0) * xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  expect(h >= 2 && w >= 2, "maxpool2", "spatial size below 2");
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor y(Shape{xv.dim(0), xv.dim(1), oh, ow});
  std::vector<std::size_t> argmax(y.size());
  for (std::size_t p = 0; p < bc; ++p)
    for (std::size_t r = 0; r < oh; ++r)
      for (std::size_t c = 0; c < ow; ++c) {
        std::size_t best = (p * h + 2 * r) * w + 2 * c;
        for (std::size_t dr = 0; dr < 2; ++dr)
          for (std::size_t dc = 0; dc < 2; ++dc) {
            const std::size_t idx = (p * h + 2 * r + dr) * w + 2 * c + dc;
            if (xv[idx] > xv[best]) best = idx;
          }
        const std::size_t o = (p * oh + r) * ow + c;
        y[o] = xv[best];
        argmax[o] = best;
      }
  return t.push(std::move(y), {x}, [x, argmax = std::move(argmax)](const Tensor& g, Tape& tp) {
    Tensor* gx = tp.grad_acc(x);
    for (std::size_t o = 0; o < g.size(); ++o) (*gx)[argmax[o]] += g[o];
  });
}

NodeId reshape(Tape& t, NodeId x, Shape shape) {
  const Tensor& xv = t.value(x);
  expect(shape_numel(shape) == xv.size(), "reshape", shape_str(xv.shape()) + " -> " + shape_str(shape));
  return t.push(xv.reshaped(std::move(shape)), {x}, [x](const Tensor& g, Tape& tp) {
    Tensor* gx = tp.grad_acc(x);
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
  });
}

NodeId cross_entropy(Tape& t, NodeId logits, std::span<const int> labels) {
  const Tensor& z = t.value(logits);
  expect(z.rank() == 2, "cross_entropy", "expects logits[B,C], got " + shape_str(z.shape()));
  const std::size_t batch = z.dim(0), classes = z.dim(1);
  expect(labels.size() == batch, "cross_entropy", "label count does not match batch");
  for (int l : labels)
    require(l >= 0 && static_cast<std::size_t>(l) < classes, ErrorCode::kInvalidArgument,
            "cross_entropy: label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");

  Tensor loss(Shape{batch});
  Tensor probs(Shape{batch, classes});
  for (std::size_t i = 0; i < batch; ++i) {
    const double* row = z.data().data() + i * classes;
    const double mx = *std::max_element(row, row + classes);
    double se = 0.0;
    for (std::size_t c = 0; c < classes; ++c) se += std::exp(row[c] - mx);
    const double lse = mx + std::log(se);
    loss[i] = lse - row[labels[i]];
    for (std::size_t c = 0; c < classes; ++c) probs[i * classes + c] = std::exp(row[c] - lse);
  }
  std::vector<int> lab(labels.begin(), labels.end());
  return t.push(std::move(loss), {logits},
                [logits, classes, lab = std::move(lab), probs = std::move(probs)](const Tensor& g, Tape& tp) {
                  Tensor* gz = tp.grad_acc(logits);
                  for (std::size_t i = 0; i < lab.size(); ++i)
                    for (std::size_t c = 0; c < classes; ++c) {
                      const double target = static_cast<int>(c) == lab[i] ? 1.0 : 0.0;
                      (*gz)[i * classes + c] += g[i] * (probs[i * classes + c] - target);
                    }
                });
}

NodeId add(Tape& t, NodeId a, NodeId b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  expect(av.shape() == bv.shape(), "add", shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return t.push(std::move(y), {a, b}, [a, b](const Tensor& g, Tape& tp) {
    for (NodeId id : {a, b})
      if (Tensor* gi = tp.grad_acc(id))
        for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i] += g[i];
  });
}

NodeId mul(Tape& t, NodeId a, NodeId b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  expect(av.shape() == bv.shape(), "mul", shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return t.push(std::move(y), {a, b}, [a, b](const Tensor& g, Tape& tp) {
    if (Tensor* ga = tp.grad_acc(a)) {
      const Tensor& bv2 = tp.value(b);
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv2[i];
    }
    if (Tensor* gb = tp.grad_acc(b)) {
      const Tensor& av2 = tp.value(a);
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av2[i];
    }
  });
}

NodeId scale(Tape& t, NodeId a, double c) {
  Tensor y = t.value(a);
  for (double& v : y.data()) v *= c;
  return t.push(std::move(y), {a}, [a, c](const Tensor& g, Tape& tp) {
    Tensor* ga = tp.grad_acc(a);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += c * g[i];
  });
}

NodeId sum(Tape& t, NodeId a) {
  double s = 0.0;
  for (double v : t.value(a).data()) s += v;
  return t.push(Tensor::scalar(s), {a}, [a](const Tensor& g, Tape& tp) {
    Tensor* ga = tp.grad_acc(a);
    for (double& v : ga->data()) v += g[0];
  });
}

NodeId mean(Tape& t, NodeId a) {
  const std::size_t n = t.value(a).size();
  expect(n > 0, "mean", "empty tensor");
  return scale(t, sum(t, a), 1.0 / static_cast<double>(n));
}

NodeId group_mean(Tape& t, NodeId a, std::size_t group) {
  const Tensor& av = t.value(a);
  expect(group > 0 && av.size() % group == 0, "group_mean",
         "size " + std::to_string(av.size()) + " not divisible by group " + std::to_string(group));
  const std::size_t m = av.size() / group;
  Tensor y(Shape{m});
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < group; ++j) s += av[i * group + j];
    y[i] = s / static_cast<double>(group);
  }
  return t.push(std::move(y), {a}, [a, group](const Tensor& g, Tape& tp) {
    Tensor* ga = tp.grad_acc(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < group; ++j) (*ga)[i * group + j] += g[i] / static_cast<double>(group);
  });
}

}  // namespace ops
}  // namespace certiprob
