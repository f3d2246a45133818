#include "sgs/stochastic.hpp"

#include <cmath>

namespace sgs {

void reduce_samples(StochasticRenderOutput& out) {
  const int s = static_cast<int>(out.samples.size());
  require(s >= 1, "reduce_samples: no samples");
  const Image& first = out.samples[0];
  const int h = first.height(), w = first.width();

  out.mean_rgb = Image(h, w, 3);
  for (const Image& img : out.samples) out.mean_rgb.array() += img.array();
  out.mean_rgb.array() /= s;

  out.uncertainty = Image(h, w, 1);
  if (s > 1) {
    Image sq(h, w, 3);
    for (const Image& img : out.samples)
      sq.array() += (img.array() - out.mean_rgb.array()).square();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int c = 0; c < 3; ++c) acc += std::sqrt(sq(y, x, c) / s);
        out.uncertainty(y, x) = acc / 3.0;
      }
  }
  out.single_sample = (s == 1);
}

StochasticRenderOutput render_stochastic(const VariationalScene& vs, const Camera& camera,
                                         int num_samples, uint64_t seed,
                                         const RenderOptions& options) {
  require(num_samples >= 1, "render_stochastic: need at least one sample");
  vs.validate();

  StochasticRenderOutput out;
  out.samples.reserve(num_samples);
  out.mean_transmittance = Image(camera.height, camera.width, 1);
  for (int s = 0; s < num_samples; ++s) {
    const NoiseDraws noise = NoiseDraws::generate(seed, s, vs.kernel_count(), vs.sh_degree);
    RenderOutput r = render(sample_scene(vs, noise), camera, options);
    out.mean_transmittance.array() += r.transmittance.array();
    out.samples.push_back(std::move(r.rgb));
  }
  out.mean_transmittance.array() /= num_samples;
  reduce_samples(out);
  return out;
}

}  // namespace sgs
