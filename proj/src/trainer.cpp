#include "sgs/trainer.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace sgs {

void TrainConfig::validate() const {
  require(total_iters >= 0 && warmup_iters >= 0, "TrainConfig: negative iteration counts");
  require(warmup_iters <= total_iters, "TrainConfig: warmup_iters exceeds total_iters");
  require(densify.until <= warmup_iters, "TrainConfig: densify_until exceeds warmup_iters");
  require(densify.interval >= 1, "TrainConfig: densify interval must be >= 1");
  if (total_iters > warmup_iters)
    require(mc_samples >= 2, "TrainConfig: Bayesian phase needs mc_samples >= 2");
  check_sh_degree(sh_degree);
}

void adam_step(ArrayXd& params, const ArrayXd& grads, AdamState& state, double lr) {
  require(params.size() == grads.size() && state.m.size() == params.size() &&
              state.v.size() == params.size(),
          "adam_step: shape mismatch");
  if (!grads.allFinite()) throw std::runtime_error("adam_step: non-finite gradient");
  state.t += 1;
  state.m = kAdamBeta1 * state.m + (1.0 - kAdamBeta1) * grads;
  state.v = kAdamBeta2 * state.v + (1.0 - kAdamBeta2) * grads.square();
  const double mc = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.t));
  const double vc = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.t));
  params -= lr * (state.m / mc) / ((state.v / vc).sqrt() + kAdamEps);
}

void DensifyStats::reset(int kernel_count) {
  grad_norm_sum.assign(kernel_count, 0.0);
  visible_count.assign(kernel_count, 0);
}

DensifyResult densify_and_prune(const Scene& scene, const DensifyStats& stats,
                                const DensifyConfig& config, uint64_t seed) {
  const int k_count = static_cast<int>(scene.kernels.size());
  require(static_cast<int>(stats.grad_norm_sum.size()) == k_count &&
              static_cast<int>(stats.visible_count.size()) == k_count,
          "densify_and_prune: stats size mismatch");

  DensifyResult result;
  result.scene.sh_degree = scene.sh_degree;
  std::vector<GaussianKernel> kernels;
  std::vector<int> source;

  for (int k = 0; k < k_count; ++k) {
    const GaussianKernel& kernel = scene.kernels[k];
    const bool hot = stats.mean_norm(k) > config.grad_threshold;
    if (!hot) {
      kernels.push_back(kernel);
      source.push_back(k);
      continue;
    }
    const double max_scale = kernel.scales().maxCoeff();
    if (max_scale <= config.clone_scale_max) {
      // Clone: the original keeps its optimizer state, the copy is fresh.
      kernels.push_back(kernel);
      source.push_back(k);
      kernels.push_back(kernel);
      source.push_back(-1);
      ++result.cloned;
    } else {
      // Split: the original is replaced by two children at positions
      // sampled from the kernel itself, with shrunken scales.
      const Mat3d rot = kernel.rotation_matrix();
      const Vec3d scales = kernel.scales();
      for (int child = 0; child < 2; ++child) {
        GaussianKernel c = kernel;
        Vec3d eps;
        for (int i = 0; i < 3; ++i) eps[i] = normal_draw(seed, 0xD5u, k, 3 * child + i);
        c.mean = kernel.mean + rot * scales.cwiseProduct(eps);
        c.log_scale = kernel.log_scale.array() - std::log(config.split_factor);
        kernels.push_back(c);
        source.push_back(-1);
      }
      ++result.split;
    }
  }

  for (size_t i = 0; i < kernels.size(); ++i) {
    if (kernels[i].opacity() < config.prune_opacity) {
      ++result.pruned;
      continue;
    }
    result.scene.kernels.push_back(kernels[i]);
    result.source.push_back(source[i]);
  }
  require(!result.scene.kernels.empty(), "densify_and_prune: every kernel was pruned");
  return result;
}

VariationalScene empirical_bayes_init(const Scene& scene, double prior_sqrt_variance) {
  require(prior_sqrt_variance > 0.0, "empirical_bayes_init: prior std must be positive");
  VariationalScene vs;
  vs.sh_degree = scene.sh_degree;
  const int basis = sh_basis_count(scene.sh_degree);
  for (const GaussianKernel& kernel : scene.kernels) {
    KernelDistribution d;
    d.mean_mu = kernel.mean;
    d.sqrt_gamma = Vec3d::Constant(prior_sqrt_variance);
    d.mean_logit_alpha = kernel.opacity_logit;
    d.sqrt_pi = prior_sqrt_variance;
    d.mean_c = kernel.sh_coeffs;
    d.sqrt_xi = ShMatrixd::Constant(basis, 3, prior_sqrt_variance);
    vs.prior.push_back(d);
    vs.posterior.push_back(d);
    vs.shape.push_back({kernel.log_scale, kernel.rotation});
  }
  vs.prior_frozen = true;
  return vs;
}

namespace {

std::vector<int> seeded_permutation(int n, uint64_t key) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(hash_key(key, 0x51u, static_cast<uint64_t>(i), 0) %
                                   static_cast<uint64_t>(i + 1));
    std::swap(p[i], p[j]);
  }
  return p;
}

ArrayXd remap_rows(const ArrayXd& data, const std::vector<int>& source, int dim) {
  ArrayXd out = ArrayXd::Zero(static_cast<Eigen::Index>(source.size()) * dim);
  for (size_t i = 0; i < source.size(); ++i)
    if (source[i] >= 0) out.segment(i * dim, dim) = data.segment(source[i] * dim, dim);
  return out;
}

// Deterministic-phase parameter groups, kernel-major.
struct DetGroups {
  ArrayXd mean, log_scale, rotation, opacity, sh;
};

DetGroups pack_scene(const Scene& scene) {
  const int k_count = static_cast<int>(scene.kernels.size());
  const int basis = sh_basis_count(scene.sh_degree);
  DetGroups g;
  g.mean.resize(3 * k_count);
  g.log_scale.resize(3 * k_count);
  g.rotation.resize(4 * k_count);
  g.opacity.resize(k_count);
  g.sh.resize(static_cast<Eigen::Index>(3) * basis * k_count);
  for (int k = 0; k < k_count; ++k) {
    const GaussianKernel& kernel = scene.kernels[k];
    g.mean.segment(3 * k, 3) = kernel.mean.array();
    g.log_scale.segment(3 * k, 3) = kernel.log_scale.array();
    g.rotation.segment(4 * k, 4) = kernel.rotation.array();
    g.opacity[k] = kernel.opacity_logit;
    for (int j = 0; j < basis; ++j)
      for (int c = 0; c < 3; ++c) g.sh[(static_cast<Eigen::Index>(k) * basis + j) * 3 + c] =
          kernel.sh_coeffs(j, c);
  }
  return g;
}

DetGroups pack_grads(const SceneGrads& grads, int basis) {
  const int k_count = static_cast<int>(grads.kernels.size());
  DetGroups g;
  g.mean.resize(3 * k_count);
  g.log_scale.resize(3 * k_count);
  g.rotation.resize(4 * k_count);
  g.opacity.resize(k_count);
  g.sh.resize(static_cast<Eigen::Index>(3) * basis * k_count);
  for (int k = 0; k < k_count; ++k) {
    const KernelGrads& kg = grads.kernels[k];
    g.mean.segment(3 * k, 3) = kg.mean.array();
    g.log_scale.segment(3 * k, 3) = kg.log_scale.array();
    g.rotation.segment(4 * k, 4) = kg.rotation.array();
    g.opacity[k] = kg.opacity_logit;
    for (int j = 0; j < basis; ++j)
      for (int c = 0; c < 3; ++c)
        g.sh[(static_cast<Eigen::Index>(k) * basis + j) * 3 + c] = kg.sh(j, c);
  }
  return g;
}

void unpack_scene(const DetGroups& g, Scene* scene) {
  const int basis = sh_basis_count(scene->sh_degree);
  for (size_t k = 0; k < scene->kernels.size(); ++k) {
    GaussianKernel& kernel = scene->kernels[k];
    kernel.mean = g.mean.segment(3 * k, 3).matrix();
    kernel.log_scale = g.log_scale.segment(3 * k, 3).matrix();
    kernel.rotation = g.rotation.segment(4 * k, 4).matrix();
    kernel.opacity_logit = g.opacity[k];
    for (int j = 0; j < basis; ++j)
      for (int c = 0; c < 3; ++c)
        kernel.sh_coeffs(j, c) = g.sh[(k * basis + j) * 3 + c];
  }
}

struct DetOptimizer {
  AdamState mean, log_scale, rotation, opacity, sh;

  static DetOptimizer zeros(int k_count, int basis) {
    DetOptimizer o;
    o.mean = AdamState::zeros(3 * k_count);
    o.log_scale = AdamState::zeros(3 * k_count);
    o.rotation = AdamState::zeros(4 * k_count);
    o.opacity = AdamState::zeros(k_count);
    o.sh = AdamState::zeros(static_cast<Eigen::Index>(3) * basis * k_count);
    return o;
  }

  void remap(const std::vector<int>& source, int basis) {
    auto apply = [&](AdamState& s, int dim) {
      s.m = remap_rows(s.m, source, dim);
      s.v = remap_rows(s.v, source, dim);
    };
    apply(mean, 3);
    apply(log_scale, 3);
    apply(rotation, 4);
    apply(opacity, 1);
    apply(sh, 3 * basis);
  }
};

// Bayesian-phase parameter groups, all stepped at the posterior rate.
struct BayesGroups {
  ArrayXd q_mean, q_sqrt_gamma, q_alpha, q_sqrt_pi, q_c, q_sqrt_xi, log_scale, rotation;
};

BayesGroups pack_vscene(const VariationalScene& vs) {
  const int k_count = vs.kernel_count();
  const int basis = sh_basis_count(vs.sh_degree);
  BayesGroups g;
  g.q_mean.resize(3 * k_count);
  g.q_sqrt_gamma.resize(3 * k_count);
  g.q_alpha.resize(k_count);
  g.q_sqrt_pi.resize(k_count);
  g.q_c.resize(static_cast<Eigen::Index>(3) * basis * k_count);
  g.q_sqrt_xi.resize(static_cast<Eigen::Index>(3) * basis * k_count);
  g.log_scale.resize(3 * k_count);
  g.rotation.resize(4 * k_count);
  for (int k = 0; k < k_count; ++k) {
    const KernelDistribution& q = vs.posterior[k];
    g.q_mean.segment(3 * k, 3) = q.mean_mu.array();
    g.q_sqrt_gamma.segment(3 * k, 3) = q.sqrt_gamma.array();
    g.q_alpha[k] = q.mean_logit_alpha;
    g.q_sqrt_pi[k] = q.sqrt_pi;
    for (int j = 0; j < basis; ++j)
      for (int c = 0; c < 3; ++c) {
        g.q_c[(static_cast<Eigen::Index>(k) * basis + j) * 3 + c] = q.mean_c(j, c);
        g.q_sqrt_xi[(static_cast<Eigen::Index>(k) * basis + j) * 3 + c] = q.sqrt_xi(j, c);
      }
    g.log_scale.segment(3 * k, 3) = vs.shape[k].log_scale.array();
    g.rotation.segment(4 * k, 4) = vs.shape[k].rotation.array();
  }
  return g;
}

BayesGroups pack_vgrads(const VariationalGrads& grads, int basis) {
  const int k_count = static_cast<int>(grads.posterior.size());
  BayesGroups g;
  g.q_mean.resize(3 * k_count);
  g.q_sqrt_gamma.resize(3 * k_count);
  g.q_alpha.resize(k_count);
  g.q_sqrt_pi.resize(k_count);
  g.q_c.resize(static_cast<Eigen::Index>(3) * basis * k_count);
  g.q_sqrt_xi.resize(static_cast<Eigen::Index>(3) * basis * k_count);
  g.log_scale.resize(3 * k_count);
  g.rotation.resize(4 * k_count);
  for (int k = 0; k < k_count; ++k) {
    const KernelDistribution& q = grads.posterior[k];
    g.q_mean.segment(3 * k, 3) = q.mean_mu.array();
    g.q_sqrt_gamma.segment(3 * k, 3) = q.sqrt_gamma.array();
    g.q_alpha[k] = q.mean_logit_alpha;
    g.q_sqrt_pi[k] = q.sqrt_pi;
    for (int j = 0; j < basis; ++j)
      for (int c = 0; c < 3; ++c) {
        g.q_c[(static_cast<Eigen::Index>(k) * basis + j) * 3 + c] = q.mean_c(j, c);
        g.q_sqrt_xi[(static_cast<Eigen::Index>(k) * basis + j) * 3 + c] = q.sqrt_xi(j, c);
      }
    g.log_scale.segment(3 * k, 3) = grads.shape[k].log_scale.array();
    g.rotation.segment(4 * k, 4) = grads.shape[k].rotation.array();
  }
  return g;
}

void unpack_vscene(const BayesGroups& g, VariationalScene* vs) {
  const int basis = sh_basis_count(vs->sh_degree);
  for (int k = 0; k < vs->kernel_count(); ++k) {
    KernelDistribution& q = vs->posterior[k];
    q.mean_mu = g.q_mean.segment(3 * k, 3).matrix();
    q.sqrt_gamma = g.q_sqrt_gamma.segment(3 * k, 3).matrix();
    q.mean_logit_alpha = g.q_alpha[k];
    q.sqrt_pi = g.q_sqrt_pi[k];
    for (int j = 0; j < basis; ++j)
      for (int c = 0; c < 3; ++c) {
        q.mean_c(j, c) = g.q_c[(static_cast<Eigen::Index>(k) * basis + j) * 3 + c];
        q.sqrt_xi(j, c) = g.q_sqrt_xi[(static_cast<Eigen::Index>(k) * basis + j) * 3 + c];
      }
    vs->shape[k].log_scale = g.log_scale.segment(3 * k, 3).matrix();
    vs->shape[k].rotation = g.rotation.segment(4 * k, 4).matrix();
  }
}

struct BayesOptimizer {
  AdamState q_mean, q_sqrt_gamma, q_alpha, q_sqrt_pi, q_c, q_sqrt_xi, log_scale, rotation;

  static BayesOptimizer zeros(int k_count, int basis) {
    BayesOptimizer o;
    o.q_mean = AdamState::zeros(3 * k_count);
    o.q_sqrt_gamma = AdamState::zeros(3 * k_count);
    o.q_alpha = AdamState::zeros(k_count);
    o.q_sqrt_pi = AdamState::zeros(k_count);
    o.q_c = AdamState::zeros(static_cast<Eigen::Index>(3) * basis * k_count);
    o.q_sqrt_xi = AdamState::zeros(static_cast<Eigen::Index>(3) * basis * k_count);
    o.log_scale = AdamState::zeros(3 * k_count);
    o.rotation = AdamState::zeros(4 * k_count);
    return o;
  }
};

}  // namespace

TrainResult train(const std::vector<TrainView>& views, const Scene& init,
                  const TrainConfig& config) {
  config.validate();
  require(views.size() >= 2, "train: need at least two posed views");
  require(!init.kernels.empty(), "train: initial scene is empty");
  require(init.sh_degree == config.sh_degree, "train: init SH degree differs from config");
  for (const TrainView& v : views) {
    v.camera.validate();
    require(v.image.height() == v.camera.height && v.image.width() == v.camera.width &&
                v.image.channels() == 3,
            "train: view image does not match its camera");
  }

  const int basis = sh_basis_count(config.sh_degree);
  const int n_views = static_cast<int>(views.size());

  TrainResult result;
  result.log.reserve(config.total_iters);

  Scene scene = init;
  DetOptimizer det_opt = DetOptimizer::zeros(static_cast<int>(scene.kernels.size()), basis);
  DensifyStats stats;
  stats.reset(static_cast<int>(scene.kernels.size()));

  VariationalScene vs;
  BayesOptimizer bayes_opt;

  std::vector<int> view_perm;
  int perm_epoch = -1;
  auto pick_view = [&](int iter) -> const TrainView& {
    const int epoch = iter / n_views;
    if (epoch != perm_epoch) {
      view_perm = seeded_permutation(n_views, hash_key(config.seed, 0xEEu, epoch, 0));
      perm_epoch = epoch;
    }
    return views[view_perm[iter % n_views]];
  };

  auto guard_finite = [](double loss, int iter) {
    if (!std::isfinite(loss))
      throw std::runtime_error("train: non-finite loss at iteration " + std::to_string(iter));
  };

  for (int iter = 0; iter < config.total_iters; ++iter) {
    const TrainView& view = pick_view(iter);

    // Empirical Bayes switch: freeze the current scene as the prior.
    if (iter == config.warmup_iters && !result.bayesian) {
      result.det_scene = scene;
      vs = empirical_bayes_init(scene, config.prior_sqrt_variance);
      bayes_opt = BayesOptimizer::zeros(vs.kernel_count(), basis);
      result.bayesian = true;
    }

    if (iter < config.warmup_iters) {
      SceneGrads grads = SceneGrads::zeros(scene);
      std::vector<char> visible;
      const DetLossResult det = deterministic_loss_backward(
          scene, view.camera, view.image, config.weights.lambda_ssim, config.render, &grads,
          &visible);
      guard_finite(det.total, iter);
      result.log.push_back({iter, det.l1, 1.0 - det.ssim_value, 0.0, 0.0, det.total, det.psnr});

      for (size_t k = 0; k < scene.kernels.size(); ++k) {
        if (!visible[k]) continue;
        ++stats.visible_count[k];
        stats.grad_norm_sum[k] += grads.kernels[k].mean.norm();
      }

      DetGroups params = pack_scene(scene);
      const DetGroups g = pack_grads(grads, basis);
      adam_step(params.mean, g.mean, det_opt.mean, config.lr.mean);
      adam_step(params.log_scale, g.log_scale, det_opt.log_scale, config.lr.scale);
      adam_step(params.rotation, g.rotation, det_opt.rotation, config.lr.rotation);
      adam_step(params.opacity, g.opacity, det_opt.opacity, config.lr.opacity);
      adam_step(params.sh, g.sh, det_opt.sh, config.lr.sh);
      unpack_scene(params, &scene);

      const int done = iter + 1;
      if (done >= config.densify.start && done <= config.densify.until &&
          (done - config.densify.start) % config.densify.interval == 0) {
        DensifyResult d = densify_and_prune(scene, stats, config.densify,
                                            hash_key(config.seed, 0xDEu, done, 0));
        scene = std::move(d.scene);
        det_opt.remap(d.source, basis);
        stats.reset(static_cast<int>(scene.kernels.size()));
      }
    } else {
      VariationalGrads grads = VariationalGrads::zeros(vs);
      Image mean_rgb;
      const LossBreakdown loss = bayesian_loss_backward(
          vs, view.camera, view.image, config.weights, config.mc_samples,
          hash_key(config.seed, 0xB5u, iter, 0), config.render, config.sparsification_bins,
          &grads, nullptr, &mean_rgb);
      guard_finite(loss.total, iter);
      result.log.push_back({iter, loss.l_rec, loss.l_ssim, loss.l_kl, loss.l_ause, loss.total,
                            psnr(mean_rgb, view.image)});

      BayesGroups params = pack_vscene(vs);
      const BayesGroups g = pack_vgrads(grads, basis);
      const double lr = config.lr.posterior;
      adam_step(params.q_mean, g.q_mean, bayes_opt.q_mean, lr);
      adam_step(params.q_sqrt_gamma, g.q_sqrt_gamma, bayes_opt.q_sqrt_gamma, lr);
      adam_step(params.q_alpha, g.q_alpha, bayes_opt.q_alpha, lr);
      adam_step(params.q_sqrt_pi, g.q_sqrt_pi, bayes_opt.q_sqrt_pi, lr);
      adam_step(params.q_c, g.q_c, bayes_opt.q_c, lr);
      adam_step(params.q_sqrt_xi, g.q_sqrt_xi, bayes_opt.q_sqrt_xi, lr);
      adam_step(params.log_scale, g.log_scale, bayes_opt.log_scale, lr);
      adam_step(params.rotation, g.rotation, bayes_opt.rotation, lr);
      unpack_vscene(params, &vs);
    }
  }

  if (!result.bayesian) {
    result.det_scene = scene;
  } else {
    result.vscene = std::move(vs);
  }
  return result;
}

}  // namespace sgs
