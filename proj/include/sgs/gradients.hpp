#pragma once

#include <string>
#include <vector>

#include "sgs/losses.hpp"
#include "sgs/renderer.hpp"
#include "sgs/variational.hpp"

namespace sgs {

// Gradients of a scalar loss with respect to one kernel's parameters.
struct KernelGrads {
  Vec3d mean = Vec3d::Zero();
  Vec3d log_scale = Vec3d::Zero();
  Vec4d rotation = Vec4d::Zero();
  double opacity_logit = 0.0;
  ShMatrixd sh;
};

struct SceneGrads {
  std::vector<KernelGrads> kernels;
  static SceneGrads zeros(const Scene& scene);
};

// Gradients for every learnable in a VariationalScene. The distribution
// structs double as gradient slots (field-for-field).
struct VariationalGrads {
  std::vector<KernelDistribution> posterior;
  std::vector<KernelShape> shape;
  static VariationalGrads zeros(const VariationalScene& vs);
};

// Reverse pass of the renderer: maps d(loss)/d(rgb) (post-clamp) back to
// every kernel parameter, re-walking the stored forward state. Gradients
// are accumulated into `grads`. The clamp subgradient convention is
// 1 inside the active range with the boundary assigned to the interior,
// 0 outside.
void render_backward(const Scene& scene, const Camera& camera, const RenderForward& fwd,
                     const Image& dloss_drgb, SceneGrads* grads);

struct DetLossResult {
  double l1 = 0.0;
  double ssim_value = 0.0;
  double total = 0.0;  // l1 + lambda_ssim * (1 - ssim)
  double psnr = 0.0;
};

// Deterministic-phase loss (and, when grads != nullptr, its gradients).
// `visibility`, when given, is set per kernel to whether it projected in
// front of the near plane.
DetLossResult deterministic_loss_backward(const Scene& scene, const Camera& camera,
                                          const Image& gt, double lambda_ssim,
                                          const RenderOptions& options, SceneGrads* grads,
                                          std::vector<char>* visibility = nullptr);

// Adds scale * d(KL)/d(posterior params) into grads.
void kl_loss_gradient(const VariationalScene& vs, double scale, VariationalGrads* grads);

// Full Eq.-style training loss of the Bayesian phase with reverse-mode
// gradients through reparameterized sampling, rendering, SSIM and the
// retained-error terms of the AUSE loss. `signature`, when given,
// receives a hash of every data-dependent ordering (per-sample depth
// orders and the AUSE sort orders); finite-difference checks use it to
// detect ordering flips.
LossBreakdown bayesian_loss_backward(const VariationalScene& vs, const Camera& camera,
                                     const Image& gt, const LossWeights& weights, int mc_samples,
                                     uint64_t seed, const RenderOptions& options, int bins,
                                     VariationalGrads* grads, uint64_t* signature = nullptr,
                                     Image* mean_rgb = nullptr);

struct FdBlockReport {
  std::string name;
  int checked = 0;
  int skipped_order_flips = 0;
  int failures = 0;
  double max_rel_err = 0.0;
  double mean_rel_err = 0.0;
  double max_abs_err = 0.0;
};

struct FdReport {
  std::vector<FdBlockReport> blocks;
  bool deterministic = false;
  bool all_ok() const;
  int total_skipped() const;
};

// Central-difference verification of bayesian_loss_backward, per
// parameter block, with frozen noise (identical seed on both sides).
// A parameter passes when |analytic - fd| <= abs_tol or the relative
// error is <= rel_tol. Parameters whose perturbation flips an ordering
// are skipped and counted. Throws if two identical forward evaluations
// disagree bit-for-bit.
FdReport finite_diff_check(const VariationalScene& vs, const Camera& camera, const Image& gt,
                           const LossWeights& weights, int mc_samples, uint64_t seed, double step,
                           const RenderOptions& options, int bins = kDefaultSparsificationBins,
                           double rel_tol = 1e-3, double abs_tol = 1e-6);

}  // namespace sgs
