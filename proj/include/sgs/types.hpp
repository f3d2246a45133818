#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>

namespace sgs {

template <typename S> using Vec2 = Eigen::Matrix<S, 2, 1>;
template <typename S> using Vec3 = Eigen::Matrix<S, 3, 1>;
template <typename S> using Vec4 = Eigen::Matrix<S, 4, 1>;
template <typename S> using Mat2 = Eigen::Matrix<S, 2, 2>;
template <typename S> using Mat3 = Eigen::Matrix<S, 3, 3>;
template <typename S> using Mat23 = Eigen::Matrix<S, 2, 3>;
// SH coefficients: one row per basis function, columns are RGB.
template <typename S> using ShMatrix = Eigen::Matrix<S, Eigen::Dynamic, 3>;

using Vec2d = Vec2<double>;
using Vec3d = Vec3<double>;
using Vec4d = Vec4<double>;
using Mat2d = Mat2<double>;
using Mat3d = Mat3<double>;
using Mat23d = Mat23<double>;
using ShMatrixd = ShMatrix<double>;
using ArrayXd = Eigen::ArrayXd;

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace sgs
