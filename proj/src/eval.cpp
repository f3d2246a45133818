#include "sgs/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "sgs/losses.hpp"

namespace sgs {

std::vector<EvalRow> evaluate_views(const VariationalScene& vs, const std::vector<TrainView>& views,
                                    int mc_samples, uint64_t seed, const RenderOptions& options,
                                    int bins) {
  require(mc_samples >= 2, "evaluate_views: need at least two MC samples");
  std::vector<EvalRow> rows;
  for (size_t v = 0; v < views.size(); ++v) {
    const TrainView& view = views[v];
    const StochasticRenderOutput out =
        render_stochastic(vs, view.camera, mc_samples, seed + v, options);

    EvalRow row;
    row.view_index = static_cast<int>(v);
    row.psnr = psnr(out.mean_rgb, view.image);
    row.ssim = ssim(out.mean_rgb, view.image);

    std::vector<double> err_rmse, uncertainty;
    ause_error_maps(out.samples, view.image, &err_rmse, &uncertainty);
    std::vector<double> err_mae(err_rmse.size(), 0.0);
    for (int y = 0; y < view.image.height(); ++y)
      for (int x = 0; x < view.image.width(); ++x) {
        double acc = 0.0;
        for (int c = 0; c < 3; ++c)
          acc += std::abs(out.mean_rgb(y, x, c) - view.image(y, x, c));
        err_mae[static_cast<size_t>(y) * view.image.width() + x] = acc / 3.0;
      }
    row.ause_rmse = ause(err_rmse, uncertainty, bins, ErrorMetric::kRmse);
    row.ause_mae = ause(err_mae, uncertainty, bins, ErrorMetric::kMae);
    rows.push_back(row);
  }
  return rows;
}

EvalRow mean_of(const std::vector<EvalRow>& rows) {
  require(!rows.empty(), "mean_of: no rows");
  EvalRow mean;
  mean.view_index = -1;
  for (const EvalRow& r : rows) {
    mean.psnr += r.psnr;
    mean.ssim += r.ssim;
    mean.ause_rmse += r.ause_rmse;
    mean.ause_mae += r.ause_mae;
  }
  const double n = static_cast<double>(rows.size());
  mean.psnr /= n;
  mean.ssim /= n;
  mean.ause_rmse /= n;
  mean.ause_mae /= n;
  return mean;
}

void write_eval_csv(const std::string& path, const std::vector<EvalRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_eval_csv: cannot open " + path);
  out << "view,psnr,ssim,ause_rmse,ause_mae\n";
  char buf[160];
  for (const EvalRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g\n", r.view_index, r.psnr, r.ssim,
                  r.ause_rmse, r.ause_mae);
    out << buf;
  }
  const EvalRow mean = mean_of(rows);
  std::snprintf(buf, sizeof(buf), "mean,%.9g,%.9g,%.9g,%.9g\n", mean.psnr, mean.ssim,
                mean.ause_rmse, mean.ause_mae);
  out << buf;
}

}  // namespace sgs
