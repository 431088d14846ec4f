#include "certiprob/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "certiprob/error.hpp"

namespace certiprob {
namespace {

void clip01(std::span<double> v) {
  for (double& d : v) d = std::clamp(d, 0.0, 1.0);
}

Shape batch_shape(const Tensor& x, std::size_t n) {
  Shape s{n};
  s.insert(s.end(), x.shape().begin(), x.shape().end());
  return s;
}

}  // namespace

std::string vicinity_kind_name(VicinityKind kind) {
  switch (kind) {
    case VicinityKind::kLinf: return "linf";
    case VicinityKind::kL2: return "l2";
    case VicinityKind::kTranslate: return "translate";
    case VicinityKind::kRotate: return "rotate";
    case VicinityKind::kScale: return "scale";
    case VicinityKind::kAffine: return "affine";
  }
  return "?";
}

VicinityKind vicinity_kind_from_name(const std::string& name) {
  for (auto k : {VicinityKind::kLinf, VicinityKind::kL2, VicinityKind::kTranslate, VicinityKind::kRotate,
                 VicinityKind::kScale, VicinityKind::kAffine})
    if (vicinity_kind_name(k) == name) return k;
  throw Error(ErrorCode::kConfig, "unknown vicinity kind '" + name + "'");
}

void VicinitySpec::validate() const {
  if (kind == VicinityKind::kAffine) {
    require(affine_translate > 0.0 && affine_rotate > 0.0 && affine_scale > 0.0, ErrorCode::kConfig,
            "vicinity: affine bounds must all be positive");
  } else {
    require(epsilon > 0.0 && std::isfinite(epsilon), ErrorCode::kConfig, "vicinity: epsilon must be positive");
  }
  require(kind != VicinityKind::kScale || epsilon < 1.0, ErrorCode::kConfig, "vicinity: scale bound must be below 1");
  require(kind != VicinityKind::kAffine || affine_scale < 1.0, ErrorCode::kConfig,
          "vicinity: affine scale bound must be below 1");
}

PerturbationBatch sample_linf(const Tensor& x, double epsilon, std::size_t n, Rng& rng, bool clip) {
  require(n >= 1, ErrorCode::kInvalidArgument, "sample_linf: n must be >= 1");
  PerturbationBatch out{Tensor(batch_shape(x, n)), std::vector<std::vector<double>>(n)};
  const std::size_t d = x.size();
  auto s = out.samples.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) s[i * d + k] = x[k] + rng.uniform(-epsilon, epsilon);
  if (clip) clip01(s);
  return out;
}

PerturbationBatch sample_l2(const Tensor& x, double epsilon, std::size_t n, Rng& rng, bool clip) {
  require(n >= 1, ErrorCode::kInvalidArgument, "sample_l2: n must be >= 1");
  PerturbationBatch out{Tensor(batch_shape(x, n)), std::vector<std::vector<double>>(n)};
  const std::size_t d = x.size();
  auto s = out.samples.data();
  std::vector<double> dir(d);
  for (std::size_t i = 0; i < n; ++i) {
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (double& v : dir) {
        v = rng.normal();
        norm2 += v * v;
      }
    } while (norm2 == 0.0);
    const double radius = epsilon * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    const double f = radius / std::sqrt(norm2);
    for (std::size_t k = 0; k < d; ++k) s[i * d + k] = x[k] + f * dir[k];
  }
  if (clip) clip01(s);
  return out;
}

Tensor transform_image(const Tensor& x, const TransformParams& p) {
  require(x.rank() == 2 || x.rank() == 3, ErrorCode::kShapeMismatch,
          "transform_image: expects [H,W] or [C,H,W], got " + shape_str(x.shape()));
  require(1.0 + p.scale > 0.0, ErrorCode::kInvalidArgument, "transform_image: scale factor must be positive");
  const std::size_t ch = x.rank() == 3 ? x.dim(0) : 1;
  const std::size_t h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1);
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double ty = p.dy * static_cast<double>(h);
  const double tx = p.dx * static_cast<double>(w);
  const double theta = p.degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double factor = 1.0 + p.scale;

  Tensor out(x.shape());
  const auto src = x.data();
  auto dst = out.data();
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t q = 0; q < w; ++q) {
      // Inverse map of output (r, q): undo translation, rotation, scale.
      const double oy = static_cast<double>(r) - cy - ty;
      const double ox = static_cast<double>(q) - cx - tx;
      const double ry = c * oy - s * ox;
      const double rx = s * oy + c * ox;
      const double sy = ry / factor + cy;
      const double sx = rx / factor + cx;
      const double fy = std::floor(sy), fx = std::floor(sx);
      const double wy = sy - fy, wx = sx - fx;
      const long y0 = static_cast<long>(fy), x0 = static_cast<long>(fx);
      for (std::size_t k = 0; k < ch; ++k) {
        const double* plane = src.data() + k * h * w;
        auto at = [&](long yy, long xx) -> double {
          if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) return 0.0;
          return plane[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)];
        };
        double v = 0.0;
        if ((1.0 - wy) * (1.0 - wx) != 0.0) v += (1.0 - wy) * (1.0 - wx) * at(y0, x0);
        if ((1.0 - wy) * wx != 0.0) v += (1.0 - wy) * wx * at(y0, x0 + 1);
        if (wy * (1.0 - wx) != 0.0) v += wy * (1.0 - wx) * at(y0 + 1, x0);
        if (wy * wx != 0.0) v += wy * wx * at(y0 + 1, x0 + 1);
        dst[k * h * w + r * w + q] = v;
      }
    }
  return out;
}

Tensor transform_image(const Tensor& x, VicinityKind kind, double param) {
  TransformParams p;
  switch (kind) {
    case VicinityKind::kTranslate: p.dy = param; break;
    case VicinityKind::kRotate: p.degrees = param; break;
    case VicinityKind::kScale: p.scale = param; break;
    default:
      throw Error(ErrorCode::kInvalidArgument,
                  "transform_image: unsupported kind '" + vicinity_kind_name(kind) + "'");
  }
  return transform_image(x, p);
}

PerturbationBatch sample_vicinity(const VicinitySpec& spec, const Tensor& x, std::size_t n, Rng& rng) {
  spec.validate();
  if (spec.kind == VicinityKind::kLinf) return sample_linf(x, spec.epsilon, n, rng, spec.clip);
  if (spec.kind == VicinityKind::kL2) return sample_l2(x, spec.epsilon, n, rng, spec.clip);

  require(n >= 1, ErrorCode::kInvalidArgument, "sample_vicinity: n must be >= 1");
  PerturbationBatch out{Tensor(batch_shape(x, n)), {}};
  out.params.reserve(n);
  const std::size_t d = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    TransformParams p;
    std::vector<double> drawn;
    const double e = spec.epsilon;
    switch (spec.kind) {
      case VicinityKind::kTranslate:
        p.dy = rng.uniform(-e, e);
        p.dx = rng.uniform(-e, e);
        drawn = {p.dy, p.dx};
        break;
      case VicinityKind::kRotate:
        p.degrees = rng.uniform(-e, e);
        drawn = {p.degrees};
        break;
      case VicinityKind::kScale:
        p.scale = rng.uniform(-e, e);
        drawn = {p.scale};
        break;
      case VicinityKind::kAffine:
        p.dy = rng.uniform(-spec.affine_translate, spec.affine_translate);
        p.dx = rng.uniform(-spec.affine_translate, spec.affine_translate);
        p.degrees = rng.uniform(-spec.affine_rotate, spec.affine_rotate);
        p.scale = rng.uniform(-spec.affine_scale, spec.affine_scale);
        drawn = {p.dy, p.dx, p.degrees, p.scale};
        break;
      default:
        break;
    }
    const Tensor img = transform_image(x, p);
    std::copy(img.data().begin(), img.data().end(), out.samples.data().begin() + static_cast<std::ptrdiff_t>(i * d));
    out.params.push_back(std::move(drawn));
  }
  if (spec.clip) clip01(out.samples.data());
  return out;
}

}  // namespace certiprob
