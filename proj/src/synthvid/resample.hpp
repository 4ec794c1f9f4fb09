#ifndef SEMLENS_SYNTHVID_RESAMPLE_HPP
#define SEMLENS_SYNTHVID_RESAMPLE_HPP

#include <string>

#include "numcore/tensor.hpp"

namespace semlens::vid {

enum class Degradation { BI, BD };

struct DegradationConfig {
  Degradation mode = Degradation::BI;
  double sigma = 1.6;  // BD only
  int scale = 4;
};

Degradation parse_degradation(const std::string& s);
std::string degradation_name(Degradation d);

// Isotropic Gaussian, normalized to sum exactly 1 after discretization.
num::Tensor gaussian_kernel(double sigma, int radius);

// Catmull-Rom bicubic (a = -0.5), half-pixel center alignment, reflective
// (symmetric) borders. Non-differentiable utility path; operates on raw data.
num::Tensor bicubic_resize(const num::Tensor& x, int64_t out_h, int64_t out_w);

// Same values as bicubic_resize (it delegates the forward pass), but wired
// into the tape: backward applies the exact adjoint of the resampling map.
num::Tensor bicubic_resize_diff(const num::Tensor& x, int64_t out_h, int64_t out_w);

// Gaussian blur with radius ceil(3*sigma), reflective borders.
num::Tensor gaussian_blur(const num::Tensor& x, double sigma);

// BI: bicubic to 1/scale. BD: blur sigma then stride-sample at offset 0.
num::Tensor degrade(const num::Tensor& hr, const DegradationConfig& cfg);

}  // namespace semlens::vid

#endif
