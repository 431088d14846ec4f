#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "certiprob/rng.hpp"
#include "certiprob/tensor.hpp"

namespace certiprob {

enum class VicinityKind { kLinf, kL2, kTranslate, kRotate, kScale, kAffine };

std::string vicinity_kind_name(VicinityKind kind);
VicinityKind vicinity_kind_from_name(const std::string& name);

/// A distance notion plus a bound; describes the set of admissible
/// perturbations of an input.
///
/// Units of `epsilon`: normalized pixel intensity for linf/l2, fraction of the
/// image side for translate, degrees for rotate, relative change of the scale
/// factor for scale. The affine kind composes translate, rotate and scale with
/// the separate bounds below and ignores `epsilon`.
struct VicinitySpec {
  VicinityKind kind = VicinityKind::kLinf;
  double epsilon = 0.3;
  bool clip = true;
  double affine_translate = 0.3;
  double affine_rotate = 35.0;
  double affine_scale = 0.3;

  void validate() const;
  bool is_transform() const { return kind != VicinityKind::kLinf && kind != VicinityKind::kL2; }
};

struct PerturbationBatch {
  Tensor samples;                          // [n, ...x.shape]
  std::vector<std::vector<double>> params;  // drawn transform parameters; empty rows for Lp kinds
};

PerturbationBatch sample_linf(const Tensor& x, double epsilon, std::size_t n, Rng& rng, bool clip = true);

/// Uniform over the L2 ball: Gaussian direction, radius epsilon * U^(1/d).
PerturbationBatch sample_l2(const Tensor& x, double epsilon, std::size_t n, Rng& rng, bool clip = true);

/// Geometric transform parameters. Translations are fractions of the image
/// height (dy) and width (dx); the scale factor is 1 + scale.
struct TransformParams {
  double dy = 0.0;
  double dx = 0.0;
  double degrees = 0.0;
  double scale = 0.0;
};

/// Applies scale, then rotation (both about the image center), then
/// translation. Bilinear interpolation; pixels mapped from outside the frame
/// are 0. Accepts [H,W] or [C,H,W].
Tensor transform_image(const Tensor& x, const TransformParams& p);

/// Single-parameter form: translate shifts rows by param*H, rotate turns by
/// param degrees, scale multiplies by (1 + param).
Tensor transform_image(const Tensor& x, VicinityKind kind, double param);

/// Draws n samples from the vicinity of x. For transform kinds each parameter
/// is drawn uniformly from [-bound, +bound].
PerturbationBatch sample_vicinity(const VicinitySpec& spec, const Tensor& x, std::size_t n, Rng& rng);

}  // namespace certiprob
