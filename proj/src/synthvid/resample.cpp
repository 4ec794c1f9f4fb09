#include "synthvid/resample.hpp"

#include <cmath>
#include <vector>

namespace semlens::vid {

using num::Tensor;

Degradation parse_degradation(const std::string& s) {
  if (s == "BI") return Degradation::BI;
  if (s == "BD") return Degradation::BD;
  throw ValidationError("unknown degradation mode: " + s);
}

std::string degradation_name(Degradation d) { return d == Degradation::BI ? "BI" : "BD"; }

Tensor gaussian_kernel(double sigma, int radius) {
  if (sigma <= 0.0) throw ValidationError("gaussian_kernel: sigma must be > 0");
  const int n = 2 * radius + 1;
  std::vector<double> k(static_cast<size_t>(n) * n);
  double s = 0.0;
  for (int y = -radius; y <= radius; ++y)
    for (int x = -radius; x <= radius; ++x) {
      const double v = std::exp(-(y * y + x * x) / (2.0 * sigma * sigma));
      k[static_cast<size_t>((y + radius) * n + (x + radius))] = v;
      s += v;
    }
  for (auto& v : k) v /= s;
  return Tensor::from_data({n, n}, std::move(k));
}

namespace {

// symmetric reflection: -1 -> 0, -2 -> 1, n -> n-1
int64_t reflect(int64_t i, int64_t n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

double catmull_rom(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

// 1-D bicubic pass along the last axis of a [rows, n] view.
void resize_axis(const std::vector<double>& in, int64_t rows, int64_t n_in,
                 std::vector<double>& out, int64_t n_out) {
  const double ratio = static_cast<double>(n_in) / static_cast<double>(n_out);
  for (int64_t o = 0; o < n_out; ++o) {
    const double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    const int64_t k = static_cast<int64_t>(std::floor(src));
    const double frac = src - static_cast<double>(k);
    double w[4];
    for (int t = 0; t < 4; ++t) w[t] = catmull_rom(frac - static_cast<double>(t - 1));
    int64_t idx[4];
    for (int t = 0; t < 4; ++t) idx[t] = reflect(k + t - 1, n_in);
    for (int64_t r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (int t = 0; t < 4; ++t) acc += w[t] * in[r * n_in + idx[t]];
      out[r * n_out + o] = acc;
    }
  }
}

std::vector<double> transpose_hw(const std::vector<double>& in, int64_t c, int64_t h, int64_t w) {
  std::vector<double> out(in.size());
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) out[(ch * w + x) * h + y] = in[(ch * h + y) * w + x];
  return out;
}

}  // namespace

Tensor bicubic_resize(const Tensor& x, int64_t out_h, int64_t out_w) {
  if (x.rank() != 3) throw ValidationError("bicubic_resize: x must be [C,H,W]");
  if (out_h < 1 || out_w < 1) throw ValidationError("bicubic_resize: output extents >= 1");
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  // horizontal pass
  std::vector<double> tmp(static_cast<size_t>(c * h * out_w));
  resize_axis(x.data(), c * h, w, tmp, out_w);
  // vertical pass via transpose
  std::vector<double> t = transpose_hw(tmp, c, h, out_w);
  std::vector<double> t2(static_cast<size_t>(c * out_w * out_h));
  resize_axis(t, c * out_w, h, t2, out_h);
  return Tensor::from_data({c, out_h, out_w}, transpose_hw(t2, c, out_w, out_h));
}

namespace {

// adjoint of resize_axis: scatters output-gradient rows back onto the taps
void adjoint_axis(const std::vector<double>& gout, int64_t rows, int64_t n_in,
                  std::vector<double>& gin, int64_t n_out) {
  const double ratio = static_cast<double>(n_in) / static_cast<double>(n_out);
  for (int64_t o = 0; o < n_out; ++o) {
    const double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    const int64_t k = static_cast<int64_t>(std::floor(src));
    const double frac = src - static_cast<double>(k);
    double w[4];
    int64_t idx[4];
    for (int t = 0; t < 4; ++t) {
      w[t] = catmull_rom(frac - static_cast<double>(t - 1));
      idx[t] = reflect(k + t - 1, n_in);
    }
    for (int64_t r = 0; r < rows; ++r)
      for (int t = 0; t < 4; ++t) gin[static_cast<size_t>(r * n_in + idx[t])] += w[t] * gout[static_cast<size_t>(r * n_out + o)];
  }
}

}  // namespace

Tensor bicubic_resize_diff(const Tensor& x, int64_t out_h, int64_t out_w) {
  Tensor y = bicubic_resize(x, out_h, out_w);
  auto n = std::make_shared<num::Node>();
  n->shape = y.shape();
  n->data = y.data();
  n->parents = {x.node()};
  auto xn = x.node();
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::weak_ptr<num::Node> wn = n;
  n->backprop = [xn, wn, c, h, w, out_h, out_w]() {
    auto self = wn.lock();
    xn->ensure_grad();
    // reverse of: horiz resize -> transpose -> vert resize -> transpose
    std::vector<double> gt2 = transpose_hw(self->grad, c, out_h, out_w);
    std::vector<double> gt(static_cast<size_t>(c * out_w * h), 0.0);
    adjoint_axis(gt2, c * out_w, h, gt, out_h);
    std::vector<double> gtmp = transpose_hw(gt, c, out_w, h);
    std::vector<double> gin(static_cast<size_t>(c * h * w), 0.0);
    adjoint_axis(gtmp, c * h, w, gin, out_w);
    for (size_t i = 0; i < gin.size(); ++i) xn->grad[i] += gin[i];
  };
  return Tensor::wrap(n);
}

Tensor gaussian_blur(const Tensor& x, double sigma) {
  if (x.rank() != 3) throw ValidationError("gaussian_blur: x must be [C,H,W]");
  if (sigma <= 0.0) throw ValidationError("gaussian_blur: sigma must be > 0");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<size_t>(2 * radius + 1));
  double s = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<size_t>(i + radius)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    s += k[static_cast<size_t>(i + radius)];
  }
  for (auto& v : k) v /= s;
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<double> tmp(x.data().size()), out(x.data().size());
  // horizontal
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[static_cast<size_t>(i + radius)] * x.data()[(ch * h + y) * w + reflect(xx + i, w)];
        tmp[static_cast<size_t>((ch * h + y) * w + xx)] = acc;
      }
  // vertical
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[static_cast<size_t>(i + radius)] * tmp[(ch * h + reflect(y + i, h)) * w + xx];
        out[static_cast<size_t>((ch * h + y) * w + xx)] = acc;
      }
  return Tensor::from_data(x.shape(), std::move(out));
}

Tensor degrade(const Tensor& hr, const DegradationConfig& cfg) {
  if (hr.rank() != 3) throw ValidationError("degrade: hr must be [C,sH,sW]");
  const int64_t sh = hr.dim(1), sw = hr.dim(2), s = cfg.scale;
  if (sh % s != 0 || sw % s != 0)
    throw ValidationError("degrade: extents not divisible by scale");
  if (cfg.mode == Degradation::BI) return bicubic_resize(hr, sh / s, sw / s);
  Tensor blurred = gaussian_blur(hr, cfg.sigma);
  const int64_t c = hr.dim(0), h = sh / s, w = sw / s;
  std::vector<double> out(static_cast<size_t>(c * h * w));
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        out[static_cast<size_t>((ch * h + y) * w + x)] =
            blurred.data()[(ch * sh + y * s) * sw + x * s];
  return Tensor::from_data({c, h, w}, std::move(out));
}

}  // namespace semlens::vid
