#include "train/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace semlens::train {

using num::Tensor;

Tensor charbonnier(const Tensor& sr, const Tensor& hr, double eps) {
  if (sr.shape() != hr.shape()) throw ValidationError("charbonnier: shape mismatch");
  if (eps <= 0.0) throw ValidationError("charbonnier: eps must be positive");
  Tensor d = num::sub(sr, hr);
  return num::mean(num::sqrt_t(num::add_scalar(num::mul(d, d), eps * eps)));
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
  if (a.shape() != b.shape()) throw ValidationError("psnr: shape mismatch");
  double mse = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data().size());
  if (mse == 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(peak * peak / mse));
}

namespace {

std::vector<double> gauss_window() {
  const int n = 11;
  const double sigma = 1.5;
  std::vector<double> w(n);
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = i - 5.0;
    w[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    s += w[static_cast<size_t>(i)];
  }
  for (auto& v : w) v /= s;
  return w;
}

// separable valid-mode filter of one channel
std::vector<double> filter_valid(const std::vector<double>& img, int64_t h, int64_t w,
                                 const std::vector<double>& k) {
  const int64_t n = static_cast<int64_t>(k.size());
  const int64_t oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(static_cast<size_t>(oh * w), 0.0);
  for (int64_t y = 0; y < oh; ++y)
    for (int64_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (int64_t i = 0; i < n; ++i) s += k[static_cast<size_t>(i)] * img[static_cast<size_t>((y + i) * w + x)];
      rows[static_cast<size_t>(y * w + x)] = s;
    }
  std::vector<double> out(static_cast<size_t>(oh * ow), 0.0);
  for (int64_t y = 0; y < oh; ++y)
    for (int64_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int64_t i = 0; i < n; ++i) s += k[static_cast<size_t>(i)] * rows[static_cast<size_t>(y * w + x + i)];
      out[static_cast<size_t>(y * ow + x)] = s;
    }
  return out;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.rank() != 3) throw ValidationError("ssim: shape mismatch");
  const int64_t c = a.dim(0), h = a.dim(1), w = a.dim(2);
  if (h < 11 || w < 11) throw ValidationError("ssim: image smaller than the 11x11 window");
  const auto win = gauss_window();
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (int64_t ch = 0; ch < c; ++ch) {
    const size_t off = static_cast<size_t>(ch * h * w);
    std::vector<double> x(a.data().begin() + off, a.data().begin() + off + h * w);
    std::vector<double> y(b.data().begin() + off, b.data().begin() + off + h * w);
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    auto mx = filter_valid(x, h, w, win), my = filter_valid(y, h, w, win);
    auto mxx = filter_valid(xx, h, w, win), myy = filter_valid(yy, h, w, win);
    auto mxy = filter_valid(xy, h, w, win);
    double acc = 0.0;
    for (size_t i = 0; i < mx.size(); ++i) {
      const double vx = mxx[i] - mx[i] * mx[i];
      const double vy = myy[i] - my[i] * my[i];
      const double cov = mxy[i] - mx[i] * my[i];
      acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / static_cast<double>(c);
}

Tensor clamp01(const Tensor& x) {
  std::vector<double> v = x.data();
  for (auto& d : v) d = std::min(1.0, std::max(0.0, d));
  return Tensor::from_data(x.shape(), std::move(v));
}

std::string metrics_csv(const std::vector<MetricsRecord>& rows) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(9);
  os << "clip_id,psnr_db,ssim,loss\n";
  double sp = 0.0, ss = 0.0, sl = 0.0;
  for (const auto& r : rows) {
    os << r.clip_id << ',' << r.psnr_db << ',' << r.ssim_val << ',' << r.loss << '\n';
    sp += r.psnr_db;
    ss += r.ssim_val;
    sl += r.loss;
  }
  const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
  os << "mean," << sp / n << ',' << ss / n << ',' << sl / n << '\n';
  return os.str();
}

}  // namespace semlens::train
