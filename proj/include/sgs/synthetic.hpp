#pragma once

#include <string>

#include "sgs/dataset.hpp"

namespace sgs {

// Ground-truth scene and posed-image dataset generation. Cameras sit on
// a ring (or arc) around the look-at point; images come from the
// reference renderer, optionally with additive Gaussian pixel noise to
// create heteroscedastic targets.
struct SynthSpec {
  int kernel_count = 16;
  Vec3d box_min = Vec3d(-1, -1, -1);
  Vec3d box_max = Vec3d(1, 1, 1);
  int train_views = 8;
  int test_views = 2;
  double ring_radius = 4.0;
  double ring_height = 0.6;
  double arc_degrees = 360.0;  // span of the camera arc
  Vec3d look_at = Vec3d::Zero();
  int width = 64;
  int height = 64;
  double fov_degrees = 50.0;  // horizontal field of view
  uint64_t seed = 0;
  double noise_std = 0.0;
  bool noise_right_half_only = false;  // noise only where x >= width/2

  void validate() const;
};

struct SynthResult {
  Scene scene;  // ground truth
  DatasetManifest manifest;
};

// Random ground-truth scene: means inside the box, per-axis scales in
// [0.05, 0.3] of the box diagonal, opacities in [0.3, 0.95], degree-1 SH
// with strictly positive colors.
Scene synth_scene(const SynthSpec& spec);

Camera synth_camera(const SynthSpec& spec, int index, int total);

// Renders the dataset into <out_dir>/images, writes cameras.json and the
// ground-truth checkpoint gt.ckpt.
SynthResult generate(const SynthSpec& spec, const std::string& out_dir);

// Random initialization for training: kernels at uniform positions in
// the box with moderate scales and gray color.
Scene random_scene_in_box(int kernel_count, const Vec3d& box_min, const Vec3d& box_max,
                          int sh_degree, uint64_t seed);

// Ground-truth scene perturbed in every parameter; `strength` scales the
// jitter (1 = the default used by the convergence tests).
Scene perturb_scene(const Scene& scene, double strength, uint64_t seed);

}  // namespace sgs
