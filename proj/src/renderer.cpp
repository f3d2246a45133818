#include "sgs/renderer.hpp"

#include <atomic>
#include <cmath>
#include <limits>

#include "sgs/parallel.hpp"
#include "sgs/sh.hpp"

namespace sgs {

namespace {

void check_scene(const Scene& scene) {
  require(!scene.kernels.empty(), "render: scene has no kernels");
  check_sh_degree(scene.sh_degree);
  const int n = sh_basis_count(scene.sh_degree);
  for (const auto& k : scene.kernels)
    require(k.sh_coeffs.rows() == n, "render: kernel SH coefficients do not match scene degree");
}

}  // namespace

RenderForward render_forward(const Scene& scene, const Camera& camera,
                             const RenderOptions& options) {
  check_scene(scene);
  camera.validate();

  RenderForward fwd;
  fwd.options = options;
  const int h = camera.height, w = camera.width;
  fwd.out.rgb = Image(h, w, 3);
  fwd.out.transmittance = Image(h, w, 1);
  fwd.rgb_raw = Image(h, w, 3);

  const int num_kernels = static_cast<int>(scene.kernels.size());
  fwd.alphas.resize(num_kernels);
  for (int k = 0; k < num_kernels; ++k) fwd.alphas[k] = scene.kernels[k].opacity();

  // Project every kernel, then sort the surviving splats by depth.
  std::vector<Splat2D> splats;
  std::vector<ProjectionContext<double>> contexts;
  splats.reserve(num_kernels);
  for (int k = 0; k < num_kernels; ++k) {
    ProjectionContext<double> ctx;
    if (auto splat = project_gaussian(scene.kernels[k], camera, k, &ctx)) {
      splats.push_back(*splat);
      contexts.push_back(ctx);
      ++fwd.out.diagnostics.projected;
    } else {
      ++fwd.out.diagnostics.culled_near;
    }
  }
  const auto order = depth_sort(splats);
  fwd.splats.reserve(splats.size());
  fwd.contexts.reserve(splats.size());
  for (int idx : order) {
    fwd.splats.push_back(splats[idx]);
    fwd.contexts.push_back(contexts[idx]);
  }

  const int num_splats = static_cast<int>(fwd.splats.size());
  fwd.conics.assign(num_splats, Mat2d::Zero());
  fwd.radius_px.assign(num_splats, std::numeric_limits<double>::infinity());
  fwd.valid.assign(num_splats, 0);
  std::vector<char>& valid = fwd.valid;
  for (int i = 0; i < num_splats; ++i) {
    if (auto conic = splat_conic(fwd.splats[i].cov2d)) {
      fwd.conics[i] = *conic;
      valid[i] = 1;
      if (options.footprint_sigma > 0) {
        const Mat2d& c = fwd.splats[i].cov2d;
        const double mean = (c(0, 0) + c(1, 1)) / 2;
        const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
        const double lmax = mean + std::sqrt(std::max(mean * mean - det, 0.0));
        fwd.radius_px[i] = options.footprint_sigma * std::sqrt(lmax);
      }
    } else {
      ++fwd.out.diagnostics.skipped_singular;
    }
  }

  const int sh_degree = scene.sh_degree;
  std::atomic<int64_t> clamped{0}, culled_contrib{0};

  parallel_chunks(h, [&](int, int y0, int y1) {
    int64_t local_clamped = 0, local_culled = 0;
    double basis[9];
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        const Vec2d p(x + 0.5, y + 0.5);
        const Vec3d dir =
            camera.rotation.transpose() * pixel_dir_camera(camera, p.x(), p.y());
        sh_basis(sh_degree, dir, basis);

        Vec3d rgb = Vec3d::Zero();
        double trans = 1.0;
        for (int i = 0; i < num_splats; ++i) {
          if (!valid[i]) continue;
          const Splat2D& splat = fwd.splats[i];
          const Vec2d d = p - splat.center_px;
          const double r = fwd.radius_px[i];
          if (std::abs(d.x()) > r || std::abs(d.y()) > r) continue;
          const double z = -0.5 * d.dot(fwd.conics[i] * d);
          const double w_raw = fwd.alphas[splat.kernel_index] * std::exp(z);
          if (options.contribution_cull && w_raw < kMinContribution) {
            ++local_culled;
            continue;
          }
          double weight = w_raw;
          if (weight > kMaxTermOpacity) {
            weight = kMaxTermOpacity;
            ++local_clamped;
          }
          const auto& coeffs = scene.kernels[splat.kernel_index].sh_coeffs;
          Vec3d color = Vec3d::Zero();
          for (int j = 0; j < coeffs.rows(); ++j) color += basis[j] * coeffs.row(j).transpose();
          color = color.cwiseMax(0.0);
          rgb += weight * trans * color;
          trans *= 1.0 - weight;
        }
        for (int c = 0; c < 3; ++c) {
          fwd.rgb_raw(y, x, c) = rgb[c];
          fwd.out.rgb(y, x, c) = std::min(std::max(rgb[c], 0.0), 1.0);
        }
        fwd.out.transmittance(y, x) = trans;
      }
    }
    clamped += local_clamped;
    culled_contrib += local_culled;
  });

  fwd.out.diagnostics.clamped_terms = clamped.load();
  fwd.out.diagnostics.culled_contribution = culled_contrib.load();
  return fwd;
}

RenderOutput render(const Scene& scene, const Camera& camera, const RenderOptions& options) {
  return render_forward(scene, camera, options).out;
}

namespace {

// Reference-only SH evaluation, written out directly.
Vec3d reference_sh_color(const Eigen::MatrixX3d& coeffs, int degree, const Vec3d& dir) {
  const double x = dir[0], y = dir[1], z = dir[2];
  std::vector<double> basis;
  basis.push_back(0.28209479177387814);
  if (degree >= 1) {
    basis.push_back(0.4886025119029199 * y);
    basis.push_back(0.4886025119029199 * z);
    basis.push_back(0.4886025119029199 * x);
  }
  if (degree >= 2) {
    basis.push_back(1.0925484305920792 * x * y);
    basis.push_back(1.0925484305920792 * y * z);
    basis.push_back(0.31539156525252005 * (3 * z * z - 1));
    basis.push_back(1.0925484305920792 * x * z);
    basis.push_back(0.5462742152960396 * (x * x - y * y));
  }
  Vec3d rgb = Vec3d::Zero();
  for (size_t j = 0; j < basis.size(); ++j)
    for (int c = 0; c < 3; ++c) rgb[c] += basis[j] * coeffs(static_cast<Eigen::Index>(j), c);
  for (int c = 0; c < 3; ++c) rgb[c] = std::max(rgb[c], 0.0);
  return rgb;
}

}  // namespace

RenderOutput render_reference(const Scene& scene, const Camera& camera) {
  check_scene(scene);
  camera.validate();

  RenderOutput out;
  out.rgb = Image(camera.height, camera.width, 3);
  out.transmittance = Image(camera.height, camera.width, 1);

  struct RefSplat {
    double depth;
    int kernel;
    Vec2d center;
    Mat2d conic;
    double alpha;
  };

  std::vector<RefSplat> splats;
  for (size_t k = 0; k < scene.kernels.size(); ++k) {
    const auto& kernel = scene.kernels[k];
    // Rigid transform into camera space; cull behind the near plane.
    const Vec3d t = camera.rotation * kernel.mean + camera.translation;
    const double depth = -t.z();
    if (!(depth > kNearPlane)) {
      ++out.diagnostics.culled_near;
      continue;
    }

    // Covariance through Eigen's own quaternion path.
    const Eigen::Quaterniond q(kernel.rotation[0], kernel.rotation[1], kernel.rotation[2],
                               kernel.rotation[3]);
    const Mat3d rot = q.normalized().toRotationMatrix();
    const Vec3d scale = kernel.log_scale.array().exp();
    const Mat3d cov3d = rot * scale.cwiseProduct(scale).asDiagonal() * rot.transpose();

    Mat23d jac;
    jac << -camera.fx / t.z(), 0, camera.fx * t.x() / (t.z() * t.z()),
        0, camera.fy / t.z(), -camera.fy * t.y() / (t.z() * t.z());
    Mat2d cov2d = (jac * camera.rotation) * cov3d * (jac * camera.rotation).transpose();
    cov2d(0, 0) += kCovDilation;
    cov2d(1, 1) += kCovDilation;
    const double off = (cov2d(0, 1) + cov2d(1, 0)) / 2;
    cov2d(0, 1) = cov2d(1, 0) = off;

    Eigen::SelfAdjointEigenSolver<Mat2d> eig(cov2d);
    const double lmin = eig.eigenvalues()[0], lmax = eig.eigenvalues()[1];
    if (!(lmin > 0) || lmax > kMaxCondition * lmin) {
      ++out.diagnostics.skipped_singular;
      continue;
    }
    ++out.diagnostics.projected;

    RefSplat s;
    s.depth = depth;
    s.kernel = static_cast<int>(k);
    s.center = Vec2d(camera.cx - camera.fx * t.x() / t.z(), camera.cy + camera.fy * t.y() / t.z());
    s.conic = cov2d.inverse();
    s.alpha = 1.0 / (1.0 + std::exp(-kernel.opacity_logit));
    splats.push_back(s);
  }

  std::sort(splats.begin(), splats.end(), [](const RefSplat& a, const RefSplat& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.kernel < b.kernel;
  });

  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const double u = x + 0.5, v = y + 0.5;
      Vec3d d_cam((u - camera.cx) / camera.fx, -(v - camera.cy) / camera.fy, -1.0);
      const Vec3d dir = (camera.rotation.transpose() * d_cam).normalized();

      Vec3d rgb = Vec3d::Zero();
      double trans = 1.0;
      for (const RefSplat& s : splats) {
        const Vec2d d(u - s.center.x(), v - s.center.y());
        const double z = -0.5 * d.dot(s.conic * d);
        double weight = s.alpha * std::exp(z);
        if (weight > kMaxTermOpacity) {
          weight = kMaxTermOpacity;
          ++out.diagnostics.clamped_terms;
        }
        const Vec3d color = reference_sh_color(scene.kernels[s.kernel].sh_coeffs, scene.sh_degree, dir);
        for (int c = 0; c < 3; ++c) rgb[c] += weight * trans * color[c];
        trans *= 1.0 - weight;
      }
      for (int c = 0; c < 3; ++c) out.rgb(y, x, c) = std::min(std::max(rgb[c], 0.0), 1.0);
      out.transmittance(y, x) = trans;
    }
  }
  return out;
}

}  // namespace sgs
