#pragma once

#include <cstdint>
#include <vector>

#include "sgs/image.hpp"
#include "sgs/projection.hpp"

namespace sgs {

// Per-term contribution below this is skipped when contribution culling
// is enabled.
inline constexpr double kMinContribution = 1.0 / 255.0;
// Per-term opacity clamp; keeps the transmittance product strictly
// positive and its gradients finite.
inline constexpr double kMaxTermOpacity = 0.99;

struct RenderOptions {
  // Splat footprint radius in screen-space sigmas; <= 0 renders every
  // splat at every pixel (exact, slow).
  double footprint_sigma = 3.0;
  bool contribution_cull = true;

  static RenderOptions exact() { return RenderOptions{0.0, false}; }
};

struct RenderDiagnostics {
  int64_t projected = 0;          // splats in front of the near plane
  int64_t culled_near = 0;        // kernels behind the near plane
  int64_t skipped_singular = 0;   // splats with a singular 2D covariance
  int64_t clamped_terms = 0;      // per-pixel terms clamped to kMaxTermOpacity
  int64_t culled_contribution = 0;
};

struct RenderOutput {
  Image rgb;             // H x W x 3, clamped to [0,1]
  Image transmittance;   // H x W, product of (1 - alpha_k e^{z_k}), in (0,1]
  RenderDiagnostics diagnostics;
};

// Forward state kept for the backward pass: the sorted splat list with
// projection intermediates and the pre-clamp accumulation image.
struct RenderForward {
  RenderOutput out;
  Image rgb_raw;                       // pre-clamp accumulation
  std::vector<Splat2D> splats;         // ascending depth
  std::vector<ProjectionContext<double>> contexts;  // aligned with splats
  std::vector<Mat2d> conics;           // aligned with splats
  std::vector<char> valid;             // conic invertible
  std::vector<double> radius_px;       // footprint radius; +inf when unbounded
  std::vector<double> alphas;          // per-kernel sigmoid(opacity_logit)
  RenderOptions options;
};

// Alpha-blended forward rendering over a black background:
// I = sum_k alpha_k e^{z_k} c_k(d) prod_{j<k} (1 - alpha_j e^{z_j}),
// with k in ascending depth order and d the pixel ray direction.
RenderOutput render(const Scene& scene, const Camera& camera,
                    const RenderOptions& options = RenderOptions());

// As render, but returns the full forward state.
RenderForward render_forward(const Scene& scene, const Camera& camera,
                             const RenderOptions& options = RenderOptions());

// Independent straight-line implementation of the same contract, used as
// a correctness oracle. No culling shortcuts beyond the mandatory
// near-plane test; identical clamps.
RenderOutput render_reference(const Scene& scene, const Camera& camera);

}  // namespace sgs
