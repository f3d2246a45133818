#pragma once

#include <cmath>

#include "sgs/types.hpp"

namespace sgs {

constexpr int kMaxShDegree = 2;

inline int sh_basis_count(int degree) { return (degree + 1) * (degree + 1); }

inline void check_sh_degree(int degree) {
  if (degree < 0 || degree > kMaxShDegree)
    throw std::runtime_error("spherical harmonics degree must be in [0, 2]");
}

// Real spherical harmonics up to degree 2, ordered l^2 + l + m
// (so m runs over -l..l within each degree).
template <typename S>
void sh_basis(int degree, const Vec3<S>& dir, S* out) {
  check_sh_degree(degree);
  const S x = dir[0], y = dir[1], z = dir[2];
  out[0] = S(0.28209479177387814);  // 1/(2 sqrt(pi))
  if (degree >= 1) {
    const S c1 = S(0.4886025119029199);  // sqrt(3/(4 pi))
    out[1] = c1 * y;
    out[2] = c1 * z;
    out[3] = c1 * x;
  }
  if (degree >= 2) {
    const S c2a = S(1.0925484305920792);   // sqrt(15/(4 pi))
    const S c2b = S(0.31539156525252005);  // sqrt(5/(16 pi))
    const S c2c = S(0.5462742152960396);   // sqrt(15/(16 pi))
    out[4] = c2a * x * y;
    out[5] = c2a * y * z;
    out[6] = c2b * (3 * z * z - 1);
    out[7] = c2a * x * z;
    out[8] = c2c * (x * x - y * y);
  }
}

// View-dependent color: per channel sum of coeff * basis, clamped below
// at zero. `dir` must be unit within 1e-6.
template <typename S>
Vec3<S> eval_sh_color(const ShMatrix<S>& coeffs, int degree, const Vec3<S>& dir) {
  check_sh_degree(degree);
  const int n = sh_basis_count(degree);
  require(coeffs.rows() == n, "eval_sh_color: coefficient count does not match degree");
  require(std::abs(dir.norm() - S(1)) <= S(1e-6), "eval_sh_color: direction must be unit");
  S basis[9];
  sh_basis(degree, dir, basis);
  Vec3<S> rgb = Vec3<S>::Zero();
  for (int j = 0; j < n; ++j) rgb += basis[j] * coeffs.row(j).transpose();
  return rgb.cwiseMax(S(0));
}

}  // namespace sgs
