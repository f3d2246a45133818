#pragma once

#include <cmath>
#include <vector>

#include "sgs/types.hpp"

namespace sgs {

// Rotation matrix from a unit quaternion stored as (w, x, y, z).
template <typename S>
Mat3<S> quat_to_rotation(const Vec4<S>& q) {
  const S w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3<S> r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

// d(quat_to_rotation)/dq[a] for a unit quaternion, a in {w,x,y,z}.
template <typename S>
Mat3<S> quat_rotation_derivative(const Vec4<S>& q, int a) {
  const S w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3<S> d;
  switch (a) {
    case 0:
      d << 0, -z, y, z, 0, -x, -y, x, 0;
      break;
    case 1:
      d << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
      break;
    case 2:
      d << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
      break;
    default:
      d << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
      break;
  }
  return 2 * d;
}

// One elliptical 3D Gaussian kernel. Covariance is kept factored as
// R(rotation) * diag(exp(2 * log_scale)) * R^T, positive definite for any
// finite parameter values. The stored quaternion may drift off unit norm
// during optimization; it is normalized wherever the rotation is used.
template <typename S>
struct GaussianKernelT {
  Vec3<S> mean = Vec3<S>::Zero();
  Vec3<S> log_scale = Vec3<S>::Zero();
  Vec4<S> rotation = Vec4<S>(1, 0, 0, 0);  // (w, x, y, z)
  S opacity_logit = S(0);
  ShMatrix<S> sh_coeffs;  // (L+1)^2 rows, RGB columns

  Vec4<S> unit_rotation() const {
    const S n = rotation.norm();
    require(n > S(0), "GaussianKernel: zero quaternion");
    return rotation / n;
  }
  Mat3<S> rotation_matrix() const { return quat_to_rotation<S>(unit_rotation()); }
  Vec3<S> scales() const { return log_scale.array().exp().matrix(); }
  S opacity() const { return S(1) / (S(1) + std::exp(-opacity_logit)); }
};

using GaussianKernel = GaussianKernelT<double>;

template <typename S>
Mat3<S> covariance_of(const GaussianKernelT<S>& kernel) {
  require(kernel.mean.allFinite() && kernel.log_scale.allFinite() && kernel.rotation.allFinite(),
          "covariance_of: non-finite kernel");
  const Mat3<S> r = kernel.rotation_matrix();
  const Mat3<S> m = r * kernel.scales().asDiagonal();
  return m * m.transpose();
}

// exp(-1/2 (x-mu)^T Sigma^-1 (x-mu)), evaluated through the factored
// covariance: y = S^-1 R^T (x-mu) gives the quadratic form as |y|^2.
template <typename S>
S eval_kernel(const GaussianKernelT<S>& kernel, const Vec3<S>& x) {
  if (!x.allFinite() || !kernel.mean.allFinite() || !kernel.log_scale.allFinite() ||
      !kernel.rotation.allFinite())
    throw std::domain_error("eval_kernel: non-finite input");
  const Mat3<S> r = kernel.rotation_matrix();
  const Vec3<S> y =
      (r.transpose() * (x - kernel.mean)).cwiseProduct((-kernel.log_scale).array().exp().matrix());
  return std::exp(S(-0.5) * y.squaredNorm());
}

template <typename S>
struct SceneT {
  std::vector<GaussianKernelT<S>> kernels;
  int sh_degree = 0;
};

using Scene = SceneT<double>;

}  // namespace sgs
