#pragma once

#include <cstdint>
#include <vector>

#include "sgs/gradients.hpp"

namespace sgs {

struct LearningRates {
  double mean = 1e-2;  // Gaussian centers, deterministic phase
  double sh = 2.5e-3;
  double opacity = 5e-2;
  double scale = 5e-3;
  double rotation = 1e-3;
  double posterior = 1e-4;  // every Bayesian-phase group
};

struct DensifyConfig {
  int start = 500;
  int until = 1000;
  int interval = 100;
  double grad_threshold = 2e-4;  // mean accumulated positional-gradient norm
  double prune_opacity = 5e-3;
  double clone_scale_max = 0.2;  // at or below: clone; above: split
  double split_factor = 1.6;
};

struct TrainConfig {
  int warmup_iters = 2500;
  int total_iters = 10000;
  int mc_samples = 8;
  int sh_degree = 1;
  int sparsification_bins = kDefaultSparsificationBins;
  uint64_t seed = 0;
  double prior_sqrt_variance = 0.1;  // prior covariances 1e-2 I at the switch
  LossWeights weights;
  LearningRates lr;
  DensifyConfig densify;
  RenderOptions render;

  void validate() const;
};

// Adam with bias correction; eps sits inside the denominator as
// lr * m_hat / (sqrt(v_hat) + eps).
struct AdamState {
  ArrayXd m;
  ArrayXd v;
  int64_t t = 0;

  static AdamState zeros(Eigen::Index n) { return {ArrayXd::Zero(n), ArrayXd::Zero(n), 0}; }
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-15;

void adam_step(ArrayXd& params, const ArrayXd& grads, AdamState& state, double lr);

// Positional-gradient statistics accumulated between densify events.
struct DensifyStats {
  std::vector<double> grad_norm_sum;
  std::vector<int> visible_count;

  void reset(int kernel_count);
  double mean_norm(int k) const {
    return visible_count[k] > 0 ? grad_norm_sum[k] / visible_count[k] : 0.0;
  }
};

struct DensifyResult {
  Scene scene;
  // Optimizer-state source per new kernel: old index, or -1 for a fresh
  // kernel (zeroed moments).
  std::vector<int> source;
  int cloned = 0;
  int split = 0;
  int pruned = 0;
};

// Clone small / split large kernels whose mean positional gradient
// exceeds the threshold; prune kernels with opacity below the floor.
// Split children are placed at positions sampled from the parent kernel,
// deterministically from `seed`.
DensifyResult densify_and_prune(const Scene& scene, const DensifyStats& stats,
                                const DensifyConfig& config, uint64_t seed);

// Freeze the current deterministic scene as the prior (Empirical Bayes)
// and start the posterior at the prior.
VariationalScene empirical_bayes_init(const Scene& scene, double prior_sqrt_variance);

struct TrainView {
  Camera camera;
  Image image;
};

struct TrainLogRow {
  int iter = 0;
  double l_rec = 0.0;
  double l_ssim = 0.0;
  double l_kl = 0.0;
  double l_ause = 0.0;
  double total = 0.0;
  double psnr_train = 0.0;
};

struct TrainResult {
  bool bayesian = false;      // whether the Bayesian phase ran
  Scene det_scene;            // state at the end of phase 1
  VariationalScene vscene;    // populated when bayesian
  std::vector<TrainLogRow> log;
};

// Two-phase optimization: deterministic warm-up with densification, then
// the Bayesian phase from the Empirical Bayes switch at warmup_iters.
// One training view per iteration, cycled in a seeded random permutation
// per epoch.
TrainResult train(const std::vector<TrainView>& views, const Scene& init,
                  const TrainConfig& config);

}  // namespace sgs
