#include "sgs/variational.hpp"

#include <cmath>

namespace sgs {

void VariationalScene::validate() const {
  const size_t k = posterior.size();
  require(prior.size() == k && shape.size() == k,
          "VariationalScene: posterior/prior/shape kernel counts disagree");
  check_sh_degree(sh_degree);
  const int n = sh_basis_count(sh_degree);
  for (const auto& d : posterior)
    require(d.mean_c.rows() == n && d.sqrt_xi.rows() == n,
            "VariationalScene: posterior SH shape mismatch");
  for (const auto& d : prior)
    require(d.mean_c.rows() == n && d.sqrt_xi.rows() == n,
            "VariationalScene: prior SH shape mismatch");
}

Scene VariationalScene::mean_scene() const {
  return sample_scene(*this, NoiseDraws::zeros(kernel_count(), sh_degree));
}

NoiseDraws NoiseDraws::zeros(int kernel_count, int sh_degree) {
  NoiseDraws n;
  n.mean.assign(kernel_count, Vec3d::Zero());
  n.logit_alpha.assign(kernel_count, 0.0);
  n.sh.assign(kernel_count, ShMatrixd::Zero(sh_basis_count(sh_degree), 3));
  return n;
}

NoiseDraws NoiseDraws::generate(uint64_t seed, uint64_t sample_index, int kernel_count,
                                int sh_degree) {
  NoiseDraws n = zeros(kernel_count, sh_degree);
  const int basis = sh_basis_count(sh_degree);
  for (int k = 0; k < kernel_count; ++k) {
    // Slot layout per kernel: 0..2 mean, 3 opacity logit, 4.. SH.
    for (int i = 0; i < 3; ++i) n.mean[k][i] = normal_draw(seed, sample_index, k, i);
    n.logit_alpha[k] = normal_draw(seed, sample_index, k, 3);
    for (int j = 0; j < basis; ++j)
      for (int c = 0; c < 3; ++c)
        n.sh[k](j, c) = normal_draw(seed, sample_index, k, 4 + 3 * j + c);
  }
  return n;
}

Scene sample_scene(const VariationalScene& vs, const NoiseDraws& noise) {
  vs.validate();
  const int kc = vs.kernel_count();
  require(static_cast<int>(noise.mean.size()) == kc &&
              static_cast<int>(noise.logit_alpha.size()) == kc &&
              static_cast<int>(noise.sh.size()) == kc,
          "sample_scene: noise kernel count mismatch");
  const int basis = sh_basis_count(vs.sh_degree);

  Scene scene;
  scene.sh_degree = vs.sh_degree;
  scene.kernels.resize(kc);
  for (int k = 0; k < kc; ++k) {
    require(noise.sh[k].rows() == basis, "sample_scene: noise SH shape mismatch");
    const KernelDistribution& q = vs.posterior[k];
    GaussianKernel& out = scene.kernels[k];
    out.mean = q.mean_mu + q.sqrt_gamma.cwiseProduct(noise.mean[k]);
    out.opacity_logit = q.mean_logit_alpha + q.sqrt_pi * noise.logit_alpha[k];
    out.sh_coeffs = q.mean_c + q.sqrt_xi.cwiseProduct(noise.sh[k]);
    out.log_scale = vs.shape[k].log_scale;
    out.rotation = vs.shape[k].rotation;
  }
  return scene;
}

double kl_gaussian(const Eigen::VectorXd& mu0, const Eigen::VectorXd& var0,
                   const Eigen::VectorXd& mu1, const Eigen::VectorXd& var1) {
  const auto d = mu0.size();
  require(var0.size() == d && mu1.size() == d && var1.size() == d,
          "kl_gaussian: dimension mismatch");
  if ((var0.array() <= 0).any() || (var1.array() <= 0).any())
    throw std::domain_error("kl_gaussian: variances must be strictly positive");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double v0 = std::max(var0[i], kKlVarianceFloor);
    const double v1 = std::max(var1[i], kKlVarianceFloor);
    const double dm = mu1[i] - mu0[i];
    kl += 0.5 * (v0 / v1 + dm * dm / v1 - 1.0 + std::log(v1 / v0));
  }
  return kl;
}

namespace {

double kl_scalar(double mu0, double var0, double mu1, double var1) {
  const double v0 = std::max(var0, kKlVarianceFloor);
  const double v1 = std::max(var1, kKlVarianceFloor);
  const double dm = mu1 - mu0;
  return 0.5 * (v0 / v1 + dm * dm / v1 - 1.0 + std::log(v1 / v0));
}

}  // namespace

double kl_loss(const VariationalScene& vs) {
  vs.validate();
  if (!vs.prior_frozen) throw std::logic_error("kl_loss: prior is not frozen");
  double total = 0.0;
  for (int k = 0; k < vs.kernel_count(); ++k) {
    const KernelDistribution& q = vs.posterior[k];
    const KernelDistribution& p = vs.prior[k];
    for (int i = 0; i < 3; ++i)
      total += kl_scalar(q.mean_mu[i], q.sqrt_gamma[i] * q.sqrt_gamma[i], p.mean_mu[i],
                         p.sqrt_gamma[i] * p.sqrt_gamma[i]);
    total += kl_scalar(q.mean_logit_alpha, q.sqrt_pi * q.sqrt_pi, p.mean_logit_alpha,
                       p.sqrt_pi * p.sqrt_pi);
    for (Eigen::Index j = 0; j < q.mean_c.rows(); ++j)
      for (int c = 0; c < 3; ++c)
        total += kl_scalar(q.mean_c(j, c), q.sqrt_xi(j, c) * q.sqrt_xi(j, c), p.mean_c(j, c),
                           p.sqrt_xi(j, c) * p.sqrt_xi(j, c));
  }
  return total;
}

}  // namespace sgs
