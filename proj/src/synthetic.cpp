#include "sgs/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "sgs/checkpoint.hpp"
#include "sgs/export.hpp"

namespace sgs {

namespace fs = std::filesystem;

void SynthSpec::validate() const {
  require(kernel_count >= 1, "SynthSpec: need at least one kernel");
  require((box_max - box_min).minCoeff() > 0.0, "SynthSpec: degenerate bounding box");
  require(train_views >= 1 && test_views >= 0, "SynthSpec: bad view counts");
  require(width > 0 && height > 0, "SynthSpec: bad image size");
  require(ring_radius > 0.0 && fov_degrees > 0.0 && fov_degrees < 180.0,
          "SynthSpec: bad camera geometry");
}

Scene synth_scene(const SynthSpec& spec) {
  spec.validate();
  const double diag = (spec.box_max - spec.box_min).norm();
  Scene scene;
  scene.sh_degree = 1;
  scene.kernels.resize(spec.kernel_count);
  for (int k = 0; k < spec.kernel_count; ++k) {
    GaussianKernel& kernel = scene.kernels[k];
    for (int i = 0; i < 3; ++i)
      kernel.mean[i] = uniform_draw(spec.seed, 0x10u, k, i, spec.box_min[i], spec.box_max[i]);
    for (int i = 0; i < 3; ++i)
      kernel.log_scale[i] =
          std::log(uniform_draw(spec.seed, 0x11u, k, i, 0.05 * diag, 0.3 * diag));
    Vec4d q;
    for (int i = 0; i < 4; ++i) q[i] = normal_draw(spec.seed, 0x12u, k, i);
    kernel.rotation = q.normalized();
    const double alpha = uniform_draw(spec.seed, 0x13u, k, 0, 0.3, 0.95);
    kernel.opacity_logit = std::log(alpha / (1.0 - alpha));
    kernel.sh_coeffs = ShMatrixd::Zero(4, 3);
    // DC well above zero and degree-1 terms small, so view-dependent
    // colors stay strictly positive and unsaturated.
    for (int c = 0; c < 3; ++c)
      kernel.sh_coeffs(0, c) = uniform_draw(spec.seed, 0x14u, k, c, 0.7, 2.5);
    for (int j = 1; j < 4; ++j)
      for (int c = 0; c < 3; ++c)
        kernel.sh_coeffs(j, c) = uniform_draw(spec.seed, 0x15u, k, 3 * j + c, -0.15, 0.15);
  }
  return scene;
}

Camera synth_camera(const SynthSpec& spec, int index, int total) {
  const double arc = spec.arc_degrees * M_PI / 180.0;
  double angle;
  if (spec.arc_degrees >= 360.0) {
    angle = 2.0 * M_PI * index / total;
  } else {
    angle = total > 1 ? arc * (static_cast<double>(index) / (total - 1) - 0.5) : 0.0;
  }
  const Vec3d pos = spec.look_at + Vec3d(spec.ring_radius * std::sin(angle), spec.ring_height,
                                         spec.ring_radius * std::cos(angle));

  // Right-handed camera frame with -z toward the look-at point.
  const Vec3d forward = (spec.look_at - pos).normalized();
  const Vec3d z_cam = -forward;
  Vec3d x_cam = Vec3d(0, 1, 0).cross(z_cam);
  require(x_cam.norm() > 1e-9, "synth_camera: view direction parallel to the up axis");
  x_cam.normalize();
  const Vec3d y_cam = z_cam.cross(x_cam);

  Camera cam;
  cam.width = spec.width;
  cam.height = spec.height;
  cam.fx = (spec.width / 2.0) / std::tan(spec.fov_degrees * M_PI / 360.0);
  cam.fy = cam.fx;
  cam.cx = spec.width / 2.0;
  cam.cy = spec.height / 2.0;
  cam.rotation.row(0) = x_cam.transpose();
  cam.rotation.row(1) = y_cam.transpose();
  cam.rotation.row(2) = z_cam.transpose();
  cam.translation = -cam.rotation * pos;
  return cam;
}

SynthResult generate(const SynthSpec& spec, const std::string& out_dir) {
  spec.validate();
  SynthResult result;
  result.scene = synth_scene(spec);

  fs::create_directories(fs::path(out_dir) / "images");

  result.manifest.dir = out_dir;
  result.manifest.has_bounds = true;
  result.manifest.bounds_min = spec.box_min;
  result.manifest.bounds_max = spec.box_max;

  const int total = spec.train_views + spec.test_views;
  // Spread the test views evenly through the arc.
  std::vector<char> is_test(total, 0);
  for (int j = 0; j < spec.test_views; ++j) {
    int idx = static_cast<int>((j + 0.5) * total / std::max(1, spec.test_views));
    idx = std::min(idx, total - 1);
    while (is_test[idx]) idx = (idx + 1) % total;
    is_test[idx] = 1;
  }

  for (int v = 0; v < total; ++v) {
    const Camera cam = synth_camera(spec, v, total);
    RenderOutput out = render_reference(result.scene, cam);
    if (spec.noise_std > 0.0) {
      for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
          if (spec.noise_right_half_only && x < cam.width / 2) continue;
          for (int c = 0; c < 3; ++c) {
            const uint64_t px = static_cast<uint64_t>(y) * cam.width + x;
            double val = out.rgb(y, x, c) +
                         spec.noise_std * normal_draw(spec.seed, 0x20u + v, px, c);
            out.rgb(y, x, c) = std::min(std::max(val, 0.0), 1.0);
          }
        }
    }

    char name[64];
    std::snprintf(name, sizeof(name), "images/view_%03d.png", v);
    export_image(out.rgb, out_dir + "/" + name);

    DatasetView view;
    view.image_path = name;
    view.camera = cam;
    view.split = is_test[v] ? "test" : "train";
    result.manifest.views.push_back(view);
  }
  save_dataset_manifest(out_dir, result.manifest);

  Checkpoint gt;
  gt.phase = Phase::kDeterministic;
  gt.scene = result.scene;
  gt.seed = spec.seed;
  gt.config.sh_degree = result.scene.sh_degree;
  save_checkpoint(out_dir + "/gt.ckpt", gt);
  return result;
}

Scene random_scene_in_box(int kernel_count, const Vec3d& box_min, const Vec3d& box_max,
                          int sh_degree, uint64_t seed) {
  require(kernel_count >= 1, "random_scene_in_box: need at least one kernel");
  require((box_max - box_min).minCoeff() > 0.0, "random_scene_in_box: degenerate box");
  const double diag = (box_max - box_min).norm();
  const int basis = sh_basis_count(sh_degree);
  Scene scene;
  scene.sh_degree = sh_degree;
  scene.kernels.resize(kernel_count);
  for (int k = 0; k < kernel_count; ++k) {
    GaussianKernel& kernel = scene.kernels[k];
    for (int i = 0; i < 3; ++i)
      kernel.mean[i] = uniform_draw(seed, 0x30u, k, i, box_min[i], box_max[i]);
    kernel.log_scale = Vec3d::Constant(std::log(0.12 * diag));
    Vec4d q;
    for (int i = 0; i < 4; ++i) q[i] = normal_draw(seed, 0x31u, k, i);
    kernel.rotation = q.normalized();
    kernel.opacity_logit = 0.0;  // alpha = 0.5
    kernel.sh_coeffs = ShMatrixd::Zero(basis, 3);
    for (int c = 0; c < 3; ++c) kernel.sh_coeffs(0, c) = 1.5;
  }
  return scene;
}

Scene perturb_scene(const Scene& scene, double strength, uint64_t seed) {
  Scene out = scene;
  for (size_t k = 0; k < out.kernels.size(); ++k) {
    GaussianKernel& kernel = out.kernels[k];
    for (int i = 0; i < 3; ++i)
      kernel.mean[i] += 0.05 * strength * normal_draw(seed, 0x40u, k, i);
    for (int i = 0; i < 3; ++i)
      kernel.log_scale[i] += 0.05 * strength * normal_draw(seed, 0x41u, k, i);
    for (int i = 0; i < 4; ++i)
      kernel.rotation[i] += 0.02 * strength * normal_draw(seed, 0x42u, k, i);
    kernel.rotation.normalize();
    kernel.opacity_logit += 0.1 * strength * normal_draw(seed, 0x43u, k, 0);
    for (Eigen::Index j = 0; j < kernel.sh_coeffs.rows(); ++j)
      for (int c = 0; c < 3; ++c)
        kernel.sh_coeffs(j, c) += 0.05 * strength * normal_draw(seed, 0x44u, k, 3 * j + c);
  }
  return out;
}

}  // namespace sgs
