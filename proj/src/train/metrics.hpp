#ifndef SEMLENS_TRAIN_METRICS_HPP
#define SEMLENS_TRAIN_METRICS_HPP

#include <string>
#include <vector>

#include "numcore/tensor.hpp"

namespace semlens::train {

// Differentiable per-pixel Charbonnier: mean over elements of sqrt(d^2+eps^2).
num::Tensor charbonnier(const num::Tensor& sr, const num::Tensor& hr, double eps);

// Plain-data metrics; inputs expected in [0,1].
double psnr(const num::Tensor& a, const num::Tensor& b, double peak = 1.0);
// 11x11 Gaussian window, sigma 1.5, K1=0.01, K2=0.03, per channel, averaged.
double ssim(const num::Tensor& a, const num::Tensor& b);

// Clamp image data to [0,1] (export/metric convention).
num::Tensor clamp01(const num::Tensor& x);

struct MetricsRecord {
  std::string clip_id;
  double psnr_db = 0.0;
  double ssim_val = 0.0;
  double loss = 0.0;
};

// Rows plus one trailing "mean" aggregate; header clip_id,psnr_db,ssim,loss.
std::string metrics_csv(const std::vector<MetricsRecord>& rows);

}  // namespace semlens::train

#endif
