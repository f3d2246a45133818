#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

#include "sgs/camera.hpp"
#include "sgs/gaussian.hpp"

namespace sgs {

// Depth at or below this is culled before splatting.
inline constexpr double kNearPlane = 0.01;
// Low-pass dilation added to the projected covariance diagonal (px^2).
// Keeps the 2D footprint well conditioned for sub-pixel kernels.
inline constexpr double kCovDilation = 0.3;
// Projected covariances with a worse condition number are skipped.
inline constexpr double kMaxCondition = 1e12;

template <typename S>
struct Splat2DT {
  Vec2<S> center_px = Vec2<S>::Zero();
  Mat2<S> cov2d = Mat2<S>::Identity();
  S depth = S(0);
  int kernel_index = 0;
};

using Splat2D = Splat2DT<double>;

// Intermediates of the projection of one kernel, kept so the backward
// pass does not have to re-derive them.
template <typename S>
struct ProjectionContext {
  Vec3<S> t = Vec3<S>::Zero();       // camera-space mean
  Mat23<S> jacobian = Mat23<S>::Zero();
  Mat3<S> cov3d = Mat3<S>::Zero();
};

// EWA-style affine projection of one 3D Gaussian to screen space:
// center by perspective projection of the mean, covariance by
// J W Sigma W^T J^T + dilation, where J is the Jacobian of the
// projection at the mean. Returns empty when the mean is behind the
// near plane.
template <typename S>
std::optional<Splat2DT<S>> project_gaussian(const GaussianKernelT<S>& kernel,
                                            const CameraT<S>& camera, int kernel_index = 0,
                                            ProjectionContext<S>* ctx = nullptr) {
  camera.validate();
  const Vec3<S> t = camera.to_camera(kernel.mean);
  const S depth = -t.z();
  if (!(depth > S(kNearPlane))) return std::nullopt;

  Splat2DT<S> splat;
  splat.kernel_index = kernel_index;
  splat.depth = depth;
  splat.center_px[0] = camera.cx - camera.fx * t.x() / t.z();
  splat.center_px[1] = camera.cy + camera.fy * t.y() / t.z();

  Mat23<S> jac;
  const S inv_z = S(1) / t.z();
  jac << -camera.fx * inv_z, S(0), camera.fx * t.x() * inv_z * inv_z,
      S(0), camera.fy * inv_z, -camera.fy * t.y() * inv_z * inv_z;

  const Mat3<S> cov3d = covariance_of(kernel);
  const Mat23<S> tw = jac * camera.rotation;
  Mat2<S> cov2d = tw * cov3d * tw.transpose();
  cov2d(0, 0) += S(kCovDilation);
  cov2d(1, 1) += S(kCovDilation);
  // Exact symmetry keeps downstream inverses and gradients tidy.
  const S off = (cov2d(0, 1) + cov2d(1, 0)) / S(2);
  cov2d(0, 1) = off;
  cov2d(1, 0) = off;
  splat.cov2d = cov2d;

  if (ctx) {
    ctx->t = t;
    ctx->jacobian = jac;
    ctx->cov3d = cov3d;
  }
  return splat;
}

// Inverse of the 2x2 covariance, or empty when it is numerically
// singular (condition number above kMaxCondition).
template <typename S>
std::optional<Mat2<S>> splat_conic(const Mat2<S>& cov2d) {
  const S det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(1, 0);
  const S mean = (cov2d(0, 0) + cov2d(1, 1)) / S(2);
  const S disc = std::sqrt(std::max(mean * mean - det, S(0)));
  const S lmax = mean + disc;
  const S lmin = mean - disc;
  if (!(det > S(0)) || !(lmin > S(0)) || lmax > S(kMaxCondition) * lmin) return std::nullopt;
  Mat2<S> conic;
  conic << cov2d(1, 1) / det, -cov2d(0, 1) / det, -cov2d(1, 0) / det, cov2d(0, 0) / det;
  return conic;
}

// Splatting coefficient z = -1/2 (p - c)^T cov2d^-1 (p - c), always <= 0,
// so alpha * exp(z) lies in (0, alpha].
template <typename S>
S splat_coefficient(const Splat2DT<S>& splat, const Vec2<S>& px) {
  const auto conic = splat_conic(splat.cov2d);
  if (!conic) throw std::domain_error("splat_coefficient: singular 2D covariance");
  const Vec2<S> d = px - splat.center_px;
  return S(-0.5) * d.dot(*conic * d);
}

// Stable ascending depth order; ties keep kernel order.
template <typename S>
std::vector<int> depth_sort(const std::vector<Splat2DT<S>>& splats) {
  std::vector<int> order(splats.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (splats[a].depth != splats[b].depth) return splats[a].depth < splats[b].depth;
    return splats[a].kernel_index < splats[b].kernel_index;
  });
  return order;
}

}  // namespace sgs
