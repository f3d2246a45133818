#pragma once

#include "sgs/types.hpp"

namespace sgs {

// Pinhole camera with a rigid world-to-camera pose. Camera space is
// right-handed with x right, y up, and the view direction along -z;
// image rows grow downward. Pixel (px, py) is sampled at its center
// (px + 0.5, py + 0.5).
template <typename S>
struct CameraT {
  S fx = S(1), fy = S(1);
  S cx = S(0), cy = S(0);
  int width = 0, height = 0;
  Mat3<S> rotation = Mat3<S>::Identity();  // world -> camera
  Vec3<S> translation = Vec3<S>::Zero();

  Vec3<S> to_camera(const Vec3<S>& p_world) const { return rotation * p_world + translation; }
  Vec3<S> center() const { return -rotation.transpose() * translation; }

  void validate() const {
    require(fx > S(0) && fy > S(0), "Camera: focal lengths must be positive");
    require(width > 0 && height > 0, "Camera: non-positive image size");
    require(cx >= S(0) && cx < S(width) && cy >= S(0) && cy < S(height),
            "Camera: principal point outside image");
  }
};

using Camera = CameraT<double>;

template <typename S>
struct Ray {
  Vec3<S> origin;
  Vec3<S> dir;  // unit
};

// Unit ray through the center of an integer pixel, in world coordinates.
template <typename S>
Ray<S> pixel_ray(const CameraT<S>& camera, int px, int py) {
  if (px < 0 || px >= camera.width || py < 0 || py >= camera.height)
    throw std::out_of_range("pixel_ray: pixel outside image bounds");
  const S u = S(px) + S(0.5);
  const S v = S(py) + S(0.5);
  const Vec3<S> d_cam((u - camera.cx) / camera.fx, -(v - camera.cy) / camera.fy, S(-1));
  Ray<S> ray;
  ray.origin = camera.center();
  ray.dir = (camera.rotation.transpose() * d_cam).normalized();
  return ray;
}

// Camera-space unit direction for a (possibly fractional) pixel position.
template <typename S>
Vec3<S> pixel_dir_camera(const CameraT<S>& camera, S u, S v) {
  return Vec3<S>((u - camera.cx) / camera.fx, -(v - camera.cy) / camera.fy, S(-1)).normalized();
}

}  // namespace sgs
