#pragma once

#include <vector>

#include "sgs/image.hpp"
#include "sgs/stochastic.hpp"

namespace sgs {

struct LossWeights {
  double lambda_ssim = 0.2;
  double lambda_kl = 1e-3;
  double lambda_ause = 5.0;
};

// Sparsification bins used by training and evaluation.
inline constexpr int kDefaultSparsificationBins = 100;

enum class ErrorMetric { kRmse, kMae };

// Retained error as pixels are removed in order of decreasing key.
// fractions has B+1 entries 0, 1/B, ..., 1; the entry at fraction b/B is
// the metric over the max(1, floor((1-b/B)*N)) pixels with the lowest key.
struct SparsificationCurve {
  std::vector<double> fractions;
  std::vector<double> retained_error;
};

double l1_loss(const Image& pred, const Image& gt);

// Mean SSIM, 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03, unit
// dynamic range, averaged over channels. Windows are evaluated only
// where they fit entirely inside the image.
double ssim(const Image& pred, const Image& gt);

// As ssim; also writes d(mean ssim)/d(pred) into grad (same shape as pred).
double ssim_with_gradient(const Image& pred, const Image& gt, Image* grad);

// 10 log10(1 / MSE), capped at 100 dB for MSE below 1e-10. Inputs in [0,1].
double psnr(const Image& pred, const Image& gt);

SparsificationCurve sparsification(const std::vector<double>& errors,
                                   const std::vector<double>& order_key, int bins,
                                   ErrorMetric metric);

// Trapezoidal area under the curve over fractions [0, (B-1)/B].
double ausc(const SparsificationCurve& curve);

// AUSC of the uncertainty-ordered curve minus AUSC of the error-ordered
// (oracle) curve; non-negative up to tie effects.
double ause(const std::vector<double>& errors, const std::vector<double>& uncertainty, int bins,
            ErrorMetric metric);

// Per-pixel channel-RMSE of (mean image - gt) and the channel-mean MC
// std, flattened row-major; the maps underlying the AUSE loss.
void ause_error_maps(const std::vector<Image>& samples, const Image& gt,
                     std::vector<double>* errors, std::vector<double>* uncertainty);

// AUSE-RMSE of the Monte Carlo render against gt.
double ause_loss(const std::vector<Image>& samples, const Image& gt, int bins);

// As ause_loss; also writes d(loss)/d(mean image) (H x W x 3). The sort
// order is treated as a constant of the current values; gradients flow
// through the retained error terms only.
double ause_loss_with_gradient(const std::vector<Image>& samples, const Image& gt, int bins,
                               Image* grad_mean);

// Full-control variant: grad_mean and order_hash may each be null. The
// hash fingerprints both sort orders, for ordering-flip detection.
double ause_loss_full(const std::vector<Image>& samples, const Image& gt, int bins,
                      Image* grad_mean, uint64_t* order_hash);

struct LossBreakdown {
  double l_rec = 0.0;    // per-sample L1, averaged over samples
  double l_ssim = 0.0;   // per-sample (1 - ssim), averaged over samples
  double l_kl = 0.0;
  double l_ause = 0.0;
  double total = 0.0;
};

// L = L_rec + lambda_ssim (1 - ssim) + lambda_kl KL + lambda_ause AUSE,
// with the reconstruction and SSIM terms Monte Carlo averages over the
// rendered samples.
LossBreakdown total_loss(const StochasticRenderOutput& render, const Image& gt,
                         const VariationalScene& vs, const LossWeights& weights,
                         int bins = kDefaultSparsificationBins);

}  // namespace sgs
