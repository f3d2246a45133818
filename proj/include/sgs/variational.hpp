#pragma once

#include <vector>

#include "sgs/gaussian.hpp"
#include "sgs/random.hpp"
#include "sgs/sh.hpp"

namespace sgs {

// Diagonal-Gaussian factor over one kernel's stochastic parameters:
// mean, opacity logit, and every SH coefficient. Standard deviations are
// stored as learnable square roots, so variances are non-negative by
// construction.
struct KernelDistribution {
  Vec3d mean_mu = Vec3d::Zero();
  Vec3d sqrt_gamma = Vec3d::Zero();
  double mean_logit_alpha = 0.0;
  double sqrt_pi = 0.0;
  ShMatrixd mean_c;  // (L+1)^2 x 3
  ShMatrixd sqrt_xi;
};

// Deterministic covariance factor; the kernel shape stays a point
// estimate in the Bayesian phase.
struct KernelShape {
  Vec3d log_scale = Vec3d::Zero();
  Vec4d rotation = Vec4d(1, 0, 0, 0);
};

// Posterior + frozen prior over a whole scene.
struct VariationalScene {
  std::vector<KernelDistribution> posterior;
  std::vector<KernelDistribution> prior;
  std::vector<KernelShape> shape;
  int sh_degree = 0;
  bool prior_frozen = false;

  int kernel_count() const { return static_cast<int>(posterior.size()); }
  void validate() const;

  // Posterior-mean point estimate as a renderable scene.
  Scene mean_scene() const;
};

// Standard-normal draws, one per stochastic parameter.
struct NoiseDraws {
  std::vector<Vec3d> mean;       // per kernel
  std::vector<double> logit_alpha;
  std::vector<ShMatrixd> sh;     // per kernel, (L+1)^2 x 3

  static NoiseDraws zeros(int kernel_count, int sh_degree);
  // Deterministic counter-based stream addressed by (seed, sample index).
  static NoiseDraws generate(uint64_t seed, uint64_t sample_index, int kernel_count,
                             int sh_degree);
};

// Reparameterized sample: value = posterior mean + sqrt-variance * noise,
// with the covariance taken deterministically from the shape factors.
Scene sample_scene(const VariationalScene& vs, const NoiseDraws& noise);

// KL(N(mu0, diag(var0)) || N(mu1, diag(var1))), in closed form:
// sum_i 1/2 [ var0/var1 + (mu1-mu0)^2/var1 - 1 + ln(var1/var0) ].
double kl_gaussian(const Eigen::VectorXd& mu0, const Eigen::VectorXd& var0,
                   const Eigen::VectorXd& mu1, const Eigen::VectorXd& var1);

// Variance floor applied before any division inside the KL.
inline constexpr double kKlVarianceFloor = 1e-12;

// Total KL between posterior and frozen prior: factorized over kernels,
// with one 3-d block for the mean, one scalar block for the opacity
// logit, and one scalar block per SH coefficient.
double kl_loss(const VariationalScene& vs);

}  // namespace sgs
