#pragma once

#include <string>
#include <vector>

#include "sgs/dataset.hpp"
#include "sgs/stochastic.hpp"

namespace sgs {

struct EvalRow {
  int view_index = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double ause_rmse = 0.0;
  double ause_mae = 0.0;
};

// Per-view metrics of a Bayesian checkpoint over a set of posed views:
// PSNR/SSIM of the MC mean image plus AUSE under both error metrics.
std::vector<EvalRow> evaluate_views(const VariationalScene& vs, const std::vector<TrainView>& views,
                                    int mc_samples, uint64_t seed, const RenderOptions& options,
                                    int bins = kDefaultSparsificationBins);

EvalRow mean_of(const std::vector<EvalRow>& rows);

// CSV: "view,psnr,ssim,ause_rmse,ause_mae", one row per view plus a
// final "mean" row.
void write_eval_csv(const std::string& path, const std::vector<EvalRow>& rows);

}  // namespace sgs
