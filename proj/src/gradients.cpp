#include "sgs/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "sgs/parallel.hpp"
#include "sgs/sh.hpp"

namespace sgs {

SceneGrads SceneGrads::zeros(const Scene& scene) {
  SceneGrads g;
  g.kernels.resize(scene.kernels.size());
  const int basis = sh_basis_count(scene.sh_degree);
  for (auto& k : g.kernels) k.sh = ShMatrixd::Zero(basis, 3);
  return g;
}

VariationalGrads VariationalGrads::zeros(const VariationalScene& vs) {
  VariationalGrads g;
  const int basis = sh_basis_count(vs.sh_degree);
  g.posterior.resize(vs.posterior.size());
  g.shape.resize(vs.shape.size());
  for (auto& p : g.posterior) {
    p.mean_c = ShMatrixd::Zero(basis, 3);
    p.sqrt_xi = ShMatrixd::Zero(basis, 3);
  }
  for (auto& s : g.shape) s.rotation = Vec4d::Zero();
  return g;
}

namespace {

// One composited term, recomputed during the reverse walk.
struct Contribution {
  int splat = 0;
  double w_raw = 0.0;
  double weight = 0.0;
  Vec3d color_pre = Vec3d::Zero();
  Vec3d color = Vec3d::Zero();
  double trans_before = 1.0;
};

// Per-chunk accumulation buffers: screen-space per splat, parameter
// slots per kernel. Reduced in chunk order so results do not depend on
// the worker count.
struct ChunkGrads {
  std::vector<Vec2d> d_center;
  std::vector<Vec3d> d_conic;  // (0,0), (0,1), (1,1) coefficients
  std::vector<double> d_opacity;
  std::vector<ShMatrixd> d_sh;
};

}  // namespace

void render_backward(const Scene& scene, const Camera& camera, const RenderForward& fwd,
                     const Image& dloss_drgb, SceneGrads* grads) {
  const int h = camera.height, w = camera.width;
  require(dloss_drgb.height() == h && dloss_drgb.width() == w && dloss_drgb.channels() == 3,
          "render_backward: gradient image shape mismatch");
  require(grads && grads->kernels.size() == scene.kernels.size(),
          "render_backward: gradient buffer mismatch");

  const int num_splats = static_cast<int>(fwd.splats.size());
  const int num_kernels = static_cast<int>(scene.kernels.size());
  const int basis_count = sh_basis_count(scene.sh_degree);
  const RenderOptions& options = fwd.options;
  const std::vector<char>& valid = fwd.valid;

  std::vector<ChunkGrads> chunks(kParallelChunks);
  for (auto& c : chunks) {
    c.d_center.assign(num_splats, Vec2d::Zero());
    c.d_conic.assign(num_splats, Vec3d::Zero());
    c.d_opacity.assign(num_kernels, 0.0);
    c.d_sh.assign(num_kernels, ShMatrixd::Zero(basis_count, 3));
  }

  parallel_chunks(h, [&](int chunk_id, int y0, int y1) {
    ChunkGrads& acc = chunks[chunk_id];
    std::vector<Contribution> contribs;
    contribs.reserve(num_splats);
    double basis[9];

    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        const Vec2d p(x + 0.5, y + 0.5);
        const Vec3d dir = camera.rotation.transpose() * pixel_dir_camera(camera, p.x(), p.y());
        sh_basis(scene.sh_degree, dir, basis);

        // Re-walk the forward compositing, recording each term.
        contribs.clear();
        double trans = 1.0;
        for (int i = 0; i < num_splats; ++i) {
          if (!valid[i]) continue;
          const Splat2D& splat = fwd.splats[i];
          const Vec2d d = p - splat.center_px;
          const double r = fwd.radius_px[i];
          if (std::abs(d.x()) > r || std::abs(d.y()) > r) continue;
          const double z = -0.5 * d.dot(fwd.conics[i] * d);
          const double w_raw = fwd.alphas[splat.kernel_index] * std::exp(z);
          if (options.contribution_cull && w_raw < kMinContribution) continue;
          Contribution c;
          c.splat = i;
          c.w_raw = w_raw;
          c.weight = std::min(w_raw, kMaxTermOpacity);
          const auto& coeffs = scene.kernels[splat.kernel_index].sh_coeffs;
          c.color_pre = Vec3d::Zero();
          for (int j = 0; j < coeffs.rows(); ++j)
            c.color_pre += basis[j] * coeffs.row(j).transpose();
          c.color = c.color_pre.cwiseMax(0.0);
          c.trans_before = trans;
          trans *= 1.0 - c.weight;
          contribs.push_back(c);
        }

        // Loss gradient through the output clamp.
        Vec3d g_rgb;
        for (int c = 0; c < 3; ++c) {
          const double pre = fwd.rgb_raw(y, x, c);
          g_rgb[c] = (pre >= 0.0 && pre <= 1.0) ? dloss_drgb(y, x, c) : 0.0;
        }
        if (g_rgb.isZero(0.0) || contribs.empty()) continue;

        // Reverse walk; suffix holds sum_{i>k} w_i c_i T_i.
        Vec3d suffix = Vec3d::Zero();
        for (int k = static_cast<int>(contribs.size()) - 1; k >= 0; --k) {
          const Contribution& c = contribs[k];
          const Splat2D& splat = fwd.splats[c.splat];
          const int kernel = splat.kernel_index;

          for (int ch = 0; ch < 3; ++ch) {
            const double g_post = g_rgb[ch] * c.weight * c.trans_before;
            if (c.color_pre[ch] >= 0.0 && g_post != 0.0)
              for (int j = 0; j < basis_count; ++j) acc.d_sh[kernel](j, ch) += g_post * basis[j];
          }

          double g_weight = 0.0;
          for (int ch = 0; ch < 3; ++ch)
            g_weight +=
                g_rgb[ch] * (c.color[ch] * c.trans_before - suffix[ch] / (1.0 - c.weight));
          suffix += c.weight * c.trans_before * c.color;

          if (c.w_raw > kMaxTermOpacity) continue;  // clamped: flat region
          const double alpha = fwd.alphas[kernel];
          const double g_z = g_weight * c.w_raw;
          const double g_alpha = g_weight * (c.w_raw / alpha);
          acc.d_opacity[kernel] += g_alpha * alpha * (1.0 - alpha);

          const Vec2d d = p - splat.center_px;
          const Vec2d q = fwd.conics[c.splat] * d;
          acc.d_center[c.splat] += g_z * q;
          acc.d_conic[c.splat] +=
              (-0.5 * g_z) * Vec3d(d.x() * d.x(), d.x() * d.y(), d.y() * d.y());
        }
      }
    }
  });

  // Fixed-order reduction, then one projection backward per splat.
  std::vector<Vec2d> d_center(num_splats, Vec2d::Zero());
  std::vector<Vec3d> d_conic(num_splats, Vec3d::Zero());
  for (const auto& c : chunks) {
    for (int i = 0; i < num_splats; ++i) {
      d_center[i] += c.d_center[i];
      d_conic[i] += c.d_conic[i];
    }
    for (int k = 0; k < num_kernels; ++k) {
      grads->kernels[k].opacity_logit += c.d_opacity[k];
      grads->kernels[k].sh += c.d_sh[k];
    }
  }

  for (int i = 0; i < num_splats; ++i) {
    if (!valid[i]) continue;
    if (d_center[i].isZero(0.0) && d_conic[i].isZero(0.0)) continue;
    const Splat2D& splat = fwd.splats[i];
    const ProjectionContext<double>& ctx = fwd.contexts[i];
    const GaussianKernel& kernel = scene.kernels[splat.kernel_index];
    KernelGrads& kg = grads->kernels[splat.kernel_index];

    // conic -> cov2d: dL/dCov = -C G C for symmetric G.
    Mat2d g_conic;
    g_conic << d_conic[i][0], d_conic[i][1], d_conic[i][1], d_conic[i][2];
    const Mat2d g_cov = -fwd.conics[i] * g_conic * fwd.conics[i];

    // cov2d = T Sigma3 T^T + dilation, T = J W.
    const Mat23d tw = ctx.jacobian * camera.rotation;
    const Mat23d g_tw = 2.0 * g_cov * tw * ctx.cov3d;
    const Mat3d g_cov3d_partial = tw.transpose() * g_cov * tw;
    const Mat23d g_jac = g_tw * camera.rotation.transpose();

    // Jacobian entries depend on the camera-space mean t.
    const Vec3d& t = ctx.t;
    const double fx = camera.fx, fy = camera.fy;
    const double inv_z = 1.0 / t.z(), inv_z2 = inv_z * inv_z, inv_z3 = inv_z2 * inv_z;
    Vec3d g_t = Vec3d::Zero();
    g_t.x() += g_jac(0, 2) * fx * inv_z2;
    g_t.y() += g_jac(1, 2) * (-fy * inv_z2);
    g_t.z() += g_jac(0, 0) * fx * inv_z2 + g_jac(0, 2) * (-2.0 * fx * t.x() * inv_z3) +
               g_jac(1, 1) * (-fy * inv_z2) + g_jac(1, 2) * (2.0 * fy * t.y() * inv_z3);
    // Projected-center path shares the same 2x3 Jacobian.
    g_t += ctx.jacobian.transpose() * d_center[i];
    kg.mean += camera.rotation.transpose() * g_t;

    // Sigma3 = (R S)(R S)^T with S = diag(exp(log_scale)).
    const Vec4d q_unit = kernel.unit_rotation();
    const Mat3d rot = quat_to_rotation<double>(q_unit);
    const Vec3d scales = kernel.scales();
    const Mat3d m = rot * scales.asDiagonal();
    const Mat3d g_m = 2.0 * g_cov3d_partial * m;
    Mat3d g_rot;
    for (int r = 0; r < 3; ++r)
      for (int cc = 0; cc < 3; ++cc) g_rot(r, cc) = g_m(r, cc) * scales[cc];
    for (int j = 0; j < 3; ++j) {
      const double g_s = g_m.col(j).dot(rot.col(j));
      kg.log_scale[j] += g_s * scales[j];
    }

    // Rotation matrix -> raw quaternion through the normalization.
    Vec4d g_qhat;
    for (int a = 0; a < 4; ++a)
      g_qhat[a] = (quat_rotation_derivative<double>(q_unit, a).array() * g_rot.array()).sum();
    const double norm = kernel.rotation.norm();
    kg.rotation += (g_qhat - q_unit * q_unit.dot(g_qhat)) / norm;
  }

  for (int k = 0; k < num_kernels; ++k) {
    const KernelGrads& kg = grads->kernels[k];
    if (!kg.mean.allFinite() || !kg.log_scale.allFinite() || !kg.rotation.allFinite() ||
        !std::isfinite(kg.opacity_logit) || !kg.sh.allFinite())
      throw std::runtime_error("render_backward: non-finite gradient at kernel " +
                               std::to_string(k));
  }
}

DetLossResult deterministic_loss_backward(const Scene& scene, const Camera& camera,
                                          const Image& gt, double lambda_ssim,
                                          const RenderOptions& options, SceneGrads* grads,
                                          std::vector<char>* visibility) {
  const RenderForward fwd = render_forward(scene, camera, options);
  if (visibility) {
    visibility->assign(scene.kernels.size(), 0);
    for (const auto& s : fwd.splats) (*visibility)[s.kernel_index] = 1;
  }
  DetLossResult result;
  result.l1 = l1_loss(fwd.out.rgb, gt);
  result.psnr = psnr(fwd.out.rgb, gt);

  Image ssim_grad;
  if (grads) {
    result.ssim_value = ssim_with_gradient(fwd.out.rgb, gt, &ssim_grad);
  } else {
    result.ssim_value = ssim(fwd.out.rgb, gt);
  }
  result.total = result.l1 + lambda_ssim * (1.0 - result.ssim_value);
  if (!grads) return result;

  Image dloss(gt.height(), gt.width(), 3);
  const double inv_n = 1.0 / static_cast<double>(gt.size());
  for (int y = 0; y < gt.height(); ++y)
    for (int x = 0; x < gt.width(); ++x)
      for (int c = 0; c < 3; ++c) {
        const double diff = fwd.out.rgb(y, x, c) - gt(y, x, c);
        const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        dloss(y, x, c) = sgn * inv_n - lambda_ssim * ssim_grad(y, x, c);
      }
  render_backward(scene, camera, fwd, dloss, grads);
  return result;
}

void kl_loss_gradient(const VariationalScene& vs, double scale, VariationalGrads* grads) {
  require(grads && grads->posterior.size() == vs.posterior.size(),
          "kl_loss_gradient: gradient buffer mismatch");
  if (!vs.prior_frozen) throw std::logic_error("kl_loss_gradient: prior is not frozen");

  auto add = [scale](double mu0, double s0, double mu1, double s1, double* g_mu, double* g_s) {
    const double v0 = s0 * s0, v1 = std::max(s1 * s1, kKlVarianceFloor);
    *g_mu += scale * (mu0 - mu1) / v1;
    if (v0 > kKlVarianceFloor) *g_s += scale * (1.0 / v1 - 1.0 / v0) * s0;
  };

  for (int k = 0; k < vs.kernel_count(); ++k) {
    const KernelDistribution& q = vs.posterior[k];
    const KernelDistribution& p = vs.prior[k];
    KernelDistribution& g = grads->posterior[k];
    for (int i = 0; i < 3; ++i)
      add(q.mean_mu[i], q.sqrt_gamma[i], p.mean_mu[i], p.sqrt_gamma[i], &g.mean_mu[i],
          &g.sqrt_gamma[i]);
    add(q.mean_logit_alpha, q.sqrt_pi, p.mean_logit_alpha, p.sqrt_pi, &g.mean_logit_alpha,
        &g.sqrt_pi);
    for (Eigen::Index j = 0; j < q.mean_c.rows(); ++j)
      for (int c = 0; c < 3; ++c)
        add(q.mean_c(j, c), q.sqrt_xi(j, c), p.mean_c(j, c), p.sqrt_xi(j, c), &g.mean_c(j, c),
            &g.sqrt_xi(j, c));
  }
}

namespace {

uint64_t depth_order_hash(uint64_t h, const std::vector<Splat2D>& splats) {
  for (const auto& s : splats) {
    h ^= static_cast<uint64_t>(s.kernel_index) + 0x9e3779b97f4a7c15ull;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

LossBreakdown bayesian_loss_backward(const VariationalScene& vs, const Camera& camera,
                                     const Image& gt, const LossWeights& weights, int mc_samples,
                                     uint64_t seed, const RenderOptions& options, int bins,
                                     VariationalGrads* grads, uint64_t* signature,
                                     Image* mean_rgb) {
  vs.validate();
  require(mc_samples >= 2, "bayesian_loss_backward: need at least two MC samples");
  const int kc = vs.kernel_count();
  if (grads)
    require(static_cast<int>(grads->posterior.size()) == kc &&
                static_cast<int>(grads->shape.size()) == kc,
            "bayesian_loss_backward: gradient buffer mismatch");

  std::vector<NoiseDraws> noise;
  std::vector<Scene> scenes;
  std::vector<RenderForward> forwards;
  noise.reserve(mc_samples);
  scenes.reserve(mc_samples);
  forwards.reserve(mc_samples);

  uint64_t sig = 0xcbf29ce484222325ull;
  std::vector<Image> samples;
  samples.reserve(mc_samples);
  for (int s = 0; s < mc_samples; ++s) {
    noise.push_back(NoiseDraws::generate(seed, s, kc, vs.sh_degree));
    scenes.push_back(sample_scene(vs, noise.back()));
    forwards.push_back(render_forward(scenes.back(), camera, options));
    sig = depth_order_hash(sig, forwards.back().splats);
    samples.push_back(forwards.back().out.rgb);
  }

  LossBreakdown loss;
  Image ause_grad_mean;
  uint64_t ause_hash = 0;
  const bool need_ause_grad = grads != nullptr && weights.lambda_ause != 0.0;
  loss.l_ause = ause_loss_full(samples, gt, bins, need_ause_grad ? &ause_grad_mean : nullptr,
                               &ause_hash);
  sig = sig ^ (ause_hash * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
  if (signature) *signature = sig;

  loss.l_kl = kl_loss(vs);

  const double inv_s = 1.0 / mc_samples;
  const double inv_n = 1.0 / static_cast<double>(gt.size());
  for (int s = 0; s < mc_samples; ++s) {
    const Image& img = samples[s];
    loss.l_rec += l1_loss(img, gt);

    Image ssim_grad;
    double ssim_v;
    if (grads) {
      ssim_v = ssim_with_gradient(img, gt, &ssim_grad);
    } else {
      ssim_v = ssim(img, gt);
    }
    loss.l_ssim += 1.0 - ssim_v;

    if (!grads) continue;
    Image dloss(gt.height(), gt.width(), 3);
    for (int y = 0; y < gt.height(); ++y)
      for (int x = 0; x < gt.width(); ++x)
        for (int c = 0; c < 3; ++c) {
          const double diff = img(y, x, c) - gt(y, x, c);
          const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
          double g = inv_s * (sgn * inv_n - weights.lambda_ssim * ssim_grad(y, x, c));
          if (weights.lambda_ause != 0.0)
            g += weights.lambda_ause * inv_s * ause_grad_mean(y, x, c);
          dloss(y, x, c) = g;
        }

    SceneGrads sg = SceneGrads::zeros(scenes[s]);
    render_backward(scenes[s], camera, forwards[s], dloss, &sg);

    // Reparameterization: value = mean + sqrt_var * eps.
    for (int k = 0; k < kc; ++k) {
      const KernelGrads& g = sg.kernels[k];
      KernelDistribution& gp = grads->posterior[k];
      gp.mean_mu += g.mean;
      gp.sqrt_gamma += g.mean.cwiseProduct(noise[s].mean[k]);
      gp.mean_logit_alpha += g.opacity_logit;
      gp.sqrt_pi += g.opacity_logit * noise[s].logit_alpha[k];
      gp.mean_c += g.sh;
      gp.sqrt_xi += g.sh.cwiseProduct(noise[s].sh[k]);
      grads->shape[k].log_scale += g.log_scale;
      grads->shape[k].rotation += g.rotation;
    }
  }
  loss.l_rec *= inv_s;
  loss.l_ssim *= inv_s;

  if (mean_rgb) {
    *mean_rgb = Image(gt.height(), gt.width(), 3);
    for (const Image& img : samples) mean_rgb->array() += img.array();
    mean_rgb->array() /= mc_samples;
  }

  if (grads && weights.lambda_kl != 0.0) kl_loss_gradient(vs, weights.lambda_kl, grads);

  loss.total = loss.l_rec + weights.lambda_ssim * loss.l_ssim + weights.lambda_kl * loss.l_kl +
               weights.lambda_ause * loss.l_ause;
  return loss;
}

FdReport finite_diff_check(const VariationalScene& vs, const Camera& camera, const Image& gt,
                           const LossWeights& weights, int mc_samples, uint64_t seed, double step,
                           const RenderOptions& options, int bins, double rel_tol,
                           double abs_tol) {
  require(step >= 1e-6 && step <= 1e-2, "finite_diff_check: step outside [1e-6, 1e-2]");

  VariationalGrads analytic = VariationalGrads::zeros(vs);
  uint64_t base_sig = 0;
  const LossBreakdown base = bayesian_loss_backward(vs, camera, gt, weights, mc_samples, seed,
                                                    options, bins, &analytic, &base_sig);

  // Two identical evaluations must agree bit for bit.
  const LossBreakdown repeat = bayesian_loss_backward(vs, camera, gt, weights, mc_samples, seed,
                                                      options, bins, nullptr, nullptr);
  if (repeat.total != base.total)
    throw std::runtime_error("finite_diff_check: forward pass is not deterministic");

  FdReport report;
  report.deterministic = true;

  auto eval = [&](const VariationalScene& v, uint64_t* sig) {
    return bayesian_loss_backward(v, camera, gt, weights, mc_samples, seed, options, bins,
                                  nullptr, sig)
        .total;
  };

  // Parameter blocks, addressed through a mutable copy.
  struct Block {
    std::string name;
    std::function<double*(VariationalScene&, int, int)> slot;
    std::function<double(const VariationalGrads&, int, int)> grad;
    int per_kernel;
  };
  const int basis = sh_basis_count(vs.sh_degree);
  std::vector<Block> blocks = {
      {"posterior.mean_mu",
       [](VariationalScene& v, int k, int i) { return &v.posterior[k].mean_mu[i]; },
       [](const VariationalGrads& g, int k, int i) { return g.posterior[k].mean_mu[i]; }, 3},
      {"posterior.sqrt_gamma",
       [](VariationalScene& v, int k, int i) { return &v.posterior[k].sqrt_gamma[i]; },
       [](const VariationalGrads& g, int k, int i) { return g.posterior[k].sqrt_gamma[i]; }, 3},
      {"posterior.logit_alpha",
       [](VariationalScene& v, int k, int) { return &v.posterior[k].mean_logit_alpha; },
       [](const VariationalGrads& g, int k, int) { return g.posterior[k].mean_logit_alpha; }, 1},
      {"posterior.sqrt_pi",
       [](VariationalScene& v, int k, int) { return &v.posterior[k].sqrt_pi; },
       [](const VariationalGrads& g, int k, int) { return g.posterior[k].sqrt_pi; }, 1},
      {"posterior.mean_c",
       [basis](VariationalScene& v, int k, int i) { return &v.posterior[k].mean_c(i / 3, i % 3); },
       [basis](const VariationalGrads& g, int k, int i) {
         return g.posterior[k].mean_c(i / 3, i % 3);
       },
       basis * 3},
      {"posterior.sqrt_xi",
       [basis](VariationalScene& v, int k, int i) { return &v.posterior[k].sqrt_xi(i / 3, i % 3); },
       [basis](const VariationalGrads& g, int k, int i) {
         return g.posterior[k].sqrt_xi(i / 3, i % 3);
       },
       basis * 3},
      {"shape.log_scale",
       [](VariationalScene& v, int k, int i) { return &v.shape[k].log_scale[i]; },
       [](const VariationalGrads& g, int k, int i) { return g.shape[k].log_scale[i]; }, 3},
      {"shape.rotation",
       [](VariationalScene& v, int k, int i) { return &v.shape[k].rotation[i]; },
       [](const VariationalGrads& g, int k, int i) { return g.shape[k].rotation[i]; }, 4},
  };

  VariationalScene probe = vs;
  for (const Block& block : blocks) {
    FdBlockReport br;
    br.name = block.name;
    double rel_sum = 0.0;
    for (int k = 0; k < vs.kernel_count(); ++k) {
      for (int i = 0; i < block.per_kernel; ++i) {
        double* slot = block.slot(probe, k, i);
        const double saved = *slot;
        uint64_t sig_plus = 0, sig_minus = 0;
        *slot = saved + step;
        const double f_plus = eval(probe, &sig_plus);
        *slot = saved - step;
        const double f_minus = eval(probe, &sig_minus);
        *slot = saved;

        if (sig_plus != base_sig || sig_minus != base_sig) {
          ++br.skipped_order_flips;
          continue;
        }
        const double fd = (f_plus - f_minus) / (2.0 * step);
        const double a = block.grad(analytic, k, i);
        const double abs_err = std::abs(a - fd);
        const double denom = std::max(std::abs(a), std::abs(fd));
        const double rel_err = denom > 0.0 ? abs_err / denom : 0.0;
        ++br.checked;
        rel_sum += rel_err;
        br.max_abs_err = std::max(br.max_abs_err, abs_err);
        br.max_rel_err = std::max(br.max_rel_err, rel_err);
        if (abs_err > abs_tol && rel_err > rel_tol) ++br.failures;
      }
    }
    br.mean_rel_err = br.checked > 0 ? rel_sum / br.checked : 0.0;
    report.blocks.push_back(br);
  }
  return report;
}

bool FdReport::all_ok() const {
  if (!deterministic) return false;
  for (const auto& b : blocks)
    if (b.failures > 0) return false;
  return true;
}

int FdReport::total_skipped() const {
  int n = 0;
  for (const auto& b : blocks) n += b.skipped_order_flips;
  return n;
}

}  // namespace sgs
