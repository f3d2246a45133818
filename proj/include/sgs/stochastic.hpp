#pragma once

#include "sgs/renderer.hpp"
#include "sgs/variational.hpp"

namespace sgs {

struct StochasticRenderOutput {
  std::vector<Image> samples;  // S renders, each H x W x 3 in [0,1]
  Image mean_rgb;              // H x W x 3
  Image uncertainty;           // H x W, channel-mean of per-channel sample std
  Image mean_transmittance;    // H x W
  bool single_sample = false;  // S == 1: std is identically zero
};

// Monte Carlo rendering: S posterior samples rendered independently with
// noise streams derived from (seed, sample index). Uncertainty is the
// population standard deviation (divisor S) averaged over RGB.
StochasticRenderOutput render_stochastic(const VariationalScene& vs, const Camera& camera,
                                         int num_samples, uint64_t seed,
                                         const RenderOptions& options = RenderOptions());

// Mean/std reduction over already-rendered samples, in fixed order.
void reduce_samples(StochasticRenderOutput& out);

}  // namespace sgs
