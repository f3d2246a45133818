#include "sgs/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "sgs/variational.hpp"

namespace sgs {

namespace {

constexpr int kWindow = 11;
constexpr int kHalfWindow = kWindow / 2;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;
constexpr double kSsimC1 = kSsimK1 * kSsimK1;
constexpr double kSsimC2 = kSsimK2 * kSsimK2;

const std::array<double, kWindow>& ssim_window() {
  static const std::array<double, kWindow> w = [] {
    std::array<double, kWindow> v{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - kHalfWindow;
      v[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      sum += v[i];
    }
    for (double& x : v) x /= sum;
    return v;
  }();
  return w;
}

using Grid = Eigen::ArrayXXd;  // indexed (y, x)

// Separable window correlation restricted to positions where the window
// fits; output is (H-10) x (W-10).
Grid smooth_valid(const Grid& in) {
  const auto& w = ssim_window();
  const Eigen::Index h = in.rows(), ww = in.cols();
  Grid tmp(h, ww - 2 * kHalfWindow);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x + kWindow <= ww; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) acc += w[i] * in(y, x + i);
      tmp(y, x) = acc;
    }
  Grid out(h - 2 * kHalfWindow, ww - 2 * kHalfWindow);
  for (Eigen::Index y = 0; y + kWindow <= h; ++y)
    for (Eigen::Index x = 0; x < out.cols(); ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) acc += w[i] * tmp(y + i, x);
      out(y, x) = acc;
    }
  return out;
}

// Adjoint of smooth_valid: scatter a valid-region field back onto the
// full image grid.
Grid scatter_valid(const Grid& g, Eigen::Index h, Eigen::Index ww) {
  const auto& w = ssim_window();
  Grid tmp = Grid::Zero(h, g.cols());
  for (Eigen::Index y = 0; y < g.rows(); ++y)
    for (Eigen::Index x = 0; x < g.cols(); ++x)
      for (int i = 0; i < kWindow; ++i) tmp(y + i, x) += w[i] * g(y, x);
  Grid out = Grid::Zero(h, ww);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < g.cols(); ++x)
      for (int i = 0; i < kWindow; ++i) out(y, x + i) += w[i] * tmp(y, x);
  return out;
}

Grid channel_grid(const Image& img, int c) {
  Grid g(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) g(y, x) = img(y, x, c);
  return g;
}

double ssim_impl(const Image& pred, const Image& gt, Image* grad) {
  require(pred.same_shape(gt), "ssim: shape mismatch");
  require(std::min(pred.height(), pred.width()) >= kWindow,
          "ssim: image smaller than the 11x11 window");
  if (grad) *grad = Image(pred.height(), pred.width(), pred.channels());

  const Eigen::Index n_valid =
      static_cast<Eigen::Index>(pred.height() - 2 * kHalfWindow) * (pred.width() - 2 * kHalfWindow);
  double total = 0.0;
  for (int c = 0; c < pred.channels(); ++c) {
    const Grid x = channel_grid(pred, c);
    const Grid y = channel_grid(gt, c);
    const Grid mu_x = smooth_valid(x);
    const Grid mu_y = smooth_valid(y);
    const Grid var_x = smooth_valid(x * x) - mu_x * mu_x;
    const Grid var_y = smooth_valid(y * y) - mu_y * mu_y;
    const Grid cov_xy = smooth_valid(x * y) - mu_x * mu_y;

    const Grid a1 = 2.0 * mu_x * mu_y + kSsimC1;
    const Grid a2 = 2.0 * cov_xy + kSsimC2;
    const Grid b1 = mu_x * mu_x + mu_y * mu_y + kSsimC1;
    const Grid b2 = var_x + var_y + kSsimC2;
    const Grid s = (a1 * a2) / (b1 * b2);
    total += s.sum() / static_cast<double>(n_valid);

    if (grad) {
      const Grid g_mu = 2.0 * (mu_y * a2 * b1 - mu_x * a1 * a2) / (b1 * b1 * b2);
      const Grid g_var = -(a1 * a2) / (b1 * b2 * b2);
      const Grid g_cov = 2.0 * a1 / (b1 * b2);
      Grid gx = scatter_valid(g_mu, x.rows(), x.cols());
      gx += 2.0 * x * scatter_valid(g_var, x.rows(), x.cols()) -
            2.0 * scatter_valid(g_var * mu_x, x.rows(), x.cols());
      gx += y * scatter_valid(g_cov, x.rows(), x.cols()) -
            scatter_valid(g_cov * mu_y, x.rows(), x.cols());
      const double scale = 1.0 / (static_cast<double>(n_valid) * pred.channels());
      for (int yy = 0; yy < pred.height(); ++yy)
        for (int xx = 0; xx < pred.width(); ++xx) (*grad)(yy, xx, c) = gx(yy, xx) * scale;
    }
  }
  return total / pred.channels();
}

}  // namespace

double l1_loss(const Image& pred, const Image& gt) {
  require(pred.same_shape(gt) && !pred.empty(), "l1_loss: shape mismatch");
  return (pred.array() - gt.array()).abs().mean();
}

double ssim(const Image& pred, const Image& gt) { return ssim_impl(pred, gt, nullptr); }

double ssim_with_gradient(const Image& pred, const Image& gt, Image* grad) {
  return ssim_impl(pred, gt, grad);
}

double psnr(const Image& pred, const Image& gt) {
  require(pred.same_shape(gt) && !pred.empty(), "psnr: shape mismatch");
  const double mse = (pred.array() - gt.array()).square().mean();
  if (mse < 1e-10) return 100.0;
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

// Pixels ordered by decreasing key; ties keep pixel order.
std::vector<int> order_by_key_desc(const std::vector<double>& key) {
  std::vector<int> order(key.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return key[a] > key[b]; });
  return order;
}

int retained_count(int n, int bins, int b) {
  const long long kept = static_cast<long long>(n) * (bins - b) / bins;
  return static_cast<int>(std::max(1ll, kept));
}

double retained_metric(const std::vector<double>& errors, const std::vector<int>& order, int from,
                       ErrorMetric metric) {
  const int n = static_cast<int>(order.size()) - from;
  double acc = 0.0;
  if (metric == ErrorMetric::kRmse) {
    for (int i = from; i < static_cast<int>(order.size()); ++i) {
      const double e = errors[order[i]];
      acc += e * e;
    }
    return std::sqrt(acc / n);
  }
  for (int i = from; i < static_cast<int>(order.size()); ++i) acc += std::abs(errors[order[i]]);
  return acc / n;
}

uint64_t fnv_hash(uint64_t h, const std::vector<int>& order) {
  for (int v : order) {
    h ^= static_cast<uint64_t>(v) + 0x9e3779b97f4a7c15ull;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

SparsificationCurve sparsification(const std::vector<double>& errors,
                                   const std::vector<double>& order_key, int bins,
                                   ErrorMetric metric) {
  const int n = static_cast<int>(errors.size());
  require(n > 0 && order_key.size() == errors.size(), "sparsification: empty or mismatched input");
  require(bins >= 2 && n >= bins, "sparsification: need at least `bins` pixels and bins >= 2");

  const std::vector<int> order = order_by_key_desc(order_key);
  SparsificationCurve curve;
  curve.fractions.resize(bins + 1);
  curve.retained_error.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) {
    curve.fractions[b] = static_cast<double>(b) / bins;
    const int kept = retained_count(n, bins, b);
    curve.retained_error[b] = retained_metric(errors, order, n - kept, metric);
  }
  return curve;
}

double ausc(const SparsificationCurve& curve) {
  const size_t pts = curve.fractions.size();
  require(pts >= 2 && curve.retained_error.size() == pts, "ausc: malformed curve");
  // Integrate over [0, (B-1)/B]: the final all-but-one-removed point is
  // excluded.
  double area = 0.0;
  for (size_t b = 0; b + 2 < pts; ++b)
    area += (curve.fractions[b + 1] - curve.fractions[b]) *
            (curve.retained_error[b] + curve.retained_error[b + 1]) / 2.0;
  return area;
}

double ause(const std::vector<double>& errors, const std::vector<double>& uncertainty, int bins,
            ErrorMetric metric) {
  require(uncertainty.size() == errors.size(), "ause: mismatched input sizes");
  return ausc(sparsification(errors, uncertainty, bins, metric)) -
         ausc(sparsification(errors, errors, bins, metric));
}

void ause_error_maps(const std::vector<Image>& samples, const Image& gt,
                     std::vector<double>* errors, std::vector<double>* uncertainty) {
  require(!samples.empty(), "ause_error_maps: no samples");
  const int s = static_cast<int>(samples.size());
  const int h = gt.height(), w = gt.width();
  for (const Image& img : samples)
    require(img.same_shape(gt), "ause_error_maps: sample/gt shape mismatch");

  errors->assign(static_cast<size_t>(h) * w, 0.0);
  uncertainty->assign(static_cast<size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double err_sq = 0.0, unc = 0.0;
      for (int c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (const Image& img : samples) mean += img(y, x, c);
        mean /= s;
        double var = 0.0;
        for (const Image& img : samples) {
          const double d = img(y, x, c) - mean;
          var += d * d;
        }
        unc += std::sqrt(var / s);
        const double d = mean - gt(y, x, c);
        err_sq += d * d;
      }
      (*errors)[static_cast<size_t>(y) * w + x] = std::sqrt(err_sq / 3.0);
      (*uncertainty)[static_cast<size_t>(y) * w + x] = unc / 3.0;
    }
}

namespace {

double ause_loss_impl(const std::vector<Image>& samples, const Image& gt, int bins,
                      Image* grad_mean, uint64_t* order_hash) {
  require(samples.size() >= 2, "ause_loss: need at least two samples");
  std::vector<double> errors, uncertainty;
  ause_error_maps(samples, gt, &errors, &uncertainty);
  const int n = static_cast<int>(errors.size());

  // The loss value goes through the same code path as the ause metric.
  const double loss = ause(errors, uncertainty, bins, ErrorMetric::kRmse);

  if (order_hash) {
    const std::vector<int> order_u = order_by_key_desc(uncertainty);
    const std::vector<int> order_o = order_by_key_desc(errors);
    *order_hash = fnv_hash(fnv_hash(0xcbf29ce484222325ull, order_u), order_o);
  }
  if (!grad_mean) return loss;

  // Trapezoid weight of point b over [0, (B-1)/B]: 1/(2B) at the ends,
  // 1/B inside; the point at fraction 1 carries no weight. For RMSE,
  // dR_b/de_p = e_p / (n_b R_b) on retained pixels.
  auto accumulate_coef = [&](const std::vector<int>& order, std::vector<double>& coef) {
    for (int b = 0; b < bins; ++b) {
      const double tw = (b == 0 || b == bins - 1) ? 0.5 / bins : 1.0 / bins;
      const int kept = retained_count(n, bins, b);
      const double retained = retained_metric(errors, order, n - kept, ErrorMetric::kRmse);
      if (retained <= 0.0) continue;
      const double scale = tw / (kept * retained);
      for (int i = n - kept; i < n; ++i) coef[order[i]] += scale;
    }
  };

  std::vector<double> coef_u(n, 0.0), coef_o(n, 0.0);
  accumulate_coef(order_by_key_desc(uncertainty), coef_u);
  accumulate_coef(order_by_key_desc(errors), coef_o);

  // d loss / d e_p = (coef_u - coef_o) e_p, then through
  // e_p = sqrt(mean_c (mean_c_px - gt)^2).
  const int h = gt.height(), w = gt.width();
  const int s = static_cast<int>(samples.size());
  *grad_mean = Image(h, w, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int p = y * w + x;
      const double e = errors[p];
      if (e <= 0.0) continue;
      const double de = (coef_u[p] - coef_o[p]) * e;
      for (int c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (const Image& img : samples) mean += img(y, x, c);
        mean /= s;
        (*grad_mean)(y, x, c) = de * (mean - gt(y, x, c)) / (3.0 * e);
      }
    }
  return loss;
}

}  // namespace

double ause_loss(const std::vector<Image>& samples, const Image& gt, int bins) {
  return ause_loss_impl(samples, gt, bins, nullptr, nullptr);
}

double ause_loss_with_gradient(const std::vector<Image>& samples, const Image& gt, int bins,
                               Image* grad_mean) {
  return ause_loss_impl(samples, gt, bins, grad_mean, nullptr);
}

double ause_loss_full(const std::vector<Image>& samples, const Image& gt, int bins,
                      Image* grad_mean, uint64_t* order_hash) {
  return ause_loss_impl(samples, gt, bins, grad_mean, order_hash);
}

LossBreakdown total_loss(const StochasticRenderOutput& render, const Image& gt,
                         const VariationalScene& vs, const LossWeights& weights, int bins) {
  require(!render.samples.empty(), "total_loss: no rendered samples");
  LossBreakdown out;
  for (const Image& img : render.samples) {
    out.l_rec += l1_loss(img, gt);
    out.l_ssim += 1.0 - ssim(img, gt);
  }
  out.l_rec /= static_cast<double>(render.samples.size());
  out.l_ssim /= static_cast<double>(render.samples.size());
  out.l_kl = kl_loss(vs);
  out.l_ause = render.samples.size() >= 2 ? ause_loss(render.samples, gt, bins) : 0.0;
  out.total = out.l_rec + weights.lambda_ssim * out.l_ssim + weights.lambda_kl * out.l_kl +
              weights.lambda_ause * out.l_ause;
  return out;
}

}  // namespace sgs
