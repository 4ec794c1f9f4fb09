#include "numcore/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>

namespace semlens::num {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

void Node::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
}

namespace {

void check_values(const std::shared_ptr<Node>& n) {
  for (double v : n->data) {
    if (std::isnan(v)) throw RuntimeFailure("tensor op produced NaN");
    if (std::isinf(v) && !n->allows_inf) throw RuntimeFailure("tensor op produced Inf");
  }
}

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> data,
                                std::vector<std::shared_ptr<Node>> parents) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->parents = std::move(parents);
  return n;
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace

Tensor Tensor::zeros(const Shape& s) {
  return wrap(make_node(s, std::vector<double>(static_cast<size_t>(shape_numel(s)), 0.0), {}));
}

Tensor Tensor::full(const Shape& s, double v) {
  return wrap(make_node(s, std::vector<double>(static_cast<size_t>(shape_numel(s)), v), {}));
}

Tensor Tensor::from_data(const Shape& s, std::vector<double> d) {
  require(shape_numel(s) == static_cast<int64_t>(d.size()),
          "from_data: shape " + shape_str(s) + " does not match data length");
  auto n = make_node(s, std::move(d), {});
  check_values(n);
  return wrap(n);
}

Tensor Tensor::param(const Shape& s, std::vector<double> d) {
  Tensor t = from_data(s, std::move(d));
  t.set_requires_grad(true);
  return t;
}

double Tensor::item() const {
  if (n_->data.size() != 1) throw ValidationError("item() on non-scalar tensor");
  return n_->data[0];
}

void Tensor::zero_grad() {
  if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), 0.0);
}

// ----- Rng -----

Rng::Rng(uint64_t seed) {
  // splitmix64 scramble so seed 0 is usable
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  state_ = z ^ (z >> 31);
  if (state_ == 0) state_ = 0x2545F4914F6CDD1DULL;
}

uint64_t Rng::next_u64() {
  uint64_t x = state_;
  x ^= x >> 12;
  x ^= x << 25;
  x ^= x >> 27;
  state_ = x;
  return x * 0x2545F4914F6CDD1DULL;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_cache_) {
    has_cache_ = false;
    return cache_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 6.283185307179586476925286766559 * u2;
  cache_ = r * std::sin(a);
  has_cache_ = true;
  return r * std::cos(a);
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  require(hi >= lo, "uniform_int: empty range");
  uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  return lo + static_cast<int64_t>(next_u64() % span);
}

void Rng::set_state(uint64_t s, bool has_cache, double cache) {
  state_ = s;
  has_cache_ = has_cache;
  cache_ = cache;
}

// ----- elementwise -----

namespace {

Tensor binary_same_shape(const Tensor& a, const Tensor& b, const char* name,
                         const std::function<double(double, double)>& fwd,
                         const std::function<void(Node&, Node&, Node&)>& bwd,
                         bool propagate_inf) {
  require(a.shape() == b.shape(), std::string(name) + ": shape mismatch " +
                                      shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<double> out(a.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i], b.data()[i]);
  auto n = make_node(a.shape(), std::move(out), {a.node(), b.node()});
  n->allows_inf = propagate_inf && (a.allows_inf() || b.allows_inf());
  check_values(n);
  auto an = a.node(), bn = b.node();
  std::weak_ptr<Node> wn = n;
  n->backprop = [an, bn, wn, bwd]() {
    auto self = wn.lock();
    an->ensure_grad();
    bn->ensure_grad();
    bwd(*self, *an, *bn);
  };
  return Tensor::wrap(n);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      a, b, "add", [](double x, double y) { return x + y; },
      [](Node& self, Node& an, Node& bn) {
        for (size_t i = 0; i < self.grad.size(); ++i) {
          an.grad[i] += self.grad[i];
          bn.grad[i] += self.grad[i];
        }
      },
      true);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](Node& self, Node& an, Node& bn) {
        for (size_t i = 0; i < self.grad.size(); ++i) {
          an.grad[i] += self.grad[i];
          bn.grad[i] -= self.grad[i];
        }
      },
      false);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](Node& self, Node& an, Node& bn) {
        for (size_t i = 0; i < self.grad.size(); ++i) {
          an.grad[i] += self.grad[i] * bn.data[i];
          bn.grad[i] += self.grad[i] * an.data[i];
        }
      },
      false);
}

namespace {

Tensor unary(const Tensor& a, const char* /*name*/,
             const std::function<double(double)>& fwd,
             const std::function<double(double /*x*/, double /*y*/)>& dydx) {
  std::vector<double> out(a.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i]);
  auto n = make_node(a.shape(), std::move(out), {a.node()});
  check_values(n);
  auto an = a.node();
  std::weak_ptr<Node> wn = n;
  n->backprop = [an, wn, dydx]() {
    auto self = wn.lock();
    an->ensure_grad();
    for (size_t i = 0; i < self->grad.size(); ++i)
      an->grad[i] += self->grad[i] * dydx(an->data[i], self->data[i]);
  };
  return Tensor::wrap(n);
}

}  // namespace

Tensor scale(const Tensor& a, double s) {
  return unary(a, "scale", [s](double x) { return x * s; },
               [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary(a, "add_scalar", [c](double x) { return x + c; },
               [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, "sigmoid",
               [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor exp_t(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Tensor log_t(const Tensor& a) {
  return unary(a, "log", [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Tensor sqrt_t(const Tensor& a) {
  return unary(a, "sqrt", [](double x) { return std::sqrt(x); },
               [](double, double y) { return 0.5 / y; });
}

// ----- matmul family -----

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul: rank-2 tensors required");
  require(a.dim(1) == b.dim(0), "matmul: inner extents " + shape_str(a.shape()) +
                                    " x " + shape_str(b.shape()));
  const int64_t m = a.dim(0), k = a.dim(1), nn = b.dim(1);
  std::vector<double> out(static_cast<size_t>(m * nn), 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B + p * nn;
      double* orow = out.data() + i * nn;
      for (int64_t j = 0; j < nn; ++j) orow[j] += av * brow[j];
    }
  }
  auto n = make_node({m, nn}, std::move(out), {a.node(), b.node()});
  check_values(n);
  auto an = a.node(), bn = b.node();
  std::weak_ptr<Node> wn = n;
  n->backprop = [an, bn, wn, m, k, nn]() {
    auto self = wn.lock();
    an->ensure_grad();
    bn->ensure_grad();
    const double* G = self->grad.data();
    // dA = G * B^T
    for (int64_t i = 0; i < m; ++i)
      for (int64_t p = 0; p < k; ++p) {
        double acc = 0.0;
        const double* grow = G + i * nn;
        const double* brow = bn->data.data() + p * nn;
        for (int64_t j = 0; j < nn; ++j) acc += grow[j] * brow[j];
        an->grad[i * k + p] += acc;
      }
    // dB = A^T * G
    for (int64_t p = 0; p < k; ++p)
      for (int64_t i = 0; i < m; ++i) {
        const double av = an->data[i * k + p];
        if (av == 0.0) continue;
        const double* grow = G + i * nn;
        double* brow = bn->grad.data() + p * nn;
        for (int64_t j = 0; j < nn; ++j) brow[j] += av * grow[j];
      }
  };
  return Tensor::wrap(n);
}

Tensor transpose2d(const Tensor& a) {
  require(a.rank() == 2, "transpose2d: rank-2 required");
  const int64_t m = a.dim(0), nn = a.dim(1);
  std::vector<double> out(static_cast<size_t>(m * nn));
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < nn; ++j) out[j * m + i] = a.data()[i * nn + j];
  auto n = make_node({nn, m}, std::move(out), {a.node()});
  n->allows_inf = a.allows_inf();
  check_values(n);
  auto an = a.node();
  std::weak_ptr<Node> wn = n;
  n->backprop = [an, wn, m, nn]() {
    auto self = wn.lock();
    an->ensure_grad();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < nn; ++j) an->grad[i * nn + j] += self->grad[j * m + i];
  };
  return Tensor::wrap(n);
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
  require(x.rank() == 2 && v.rank() == 1 && x.dim(1) == v.dim(0),
          "add_rowvec: x[m,n] + v[n] expected");
  const int64_t m = x.dim(0), nn = x.dim(1);
  std::vector<double> out(x.data());
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < nn; ++j) out[i * nn + j] += v.data()[j];
  auto n = make_node(x.shape(), std::move(out), {x.node(), v.node()});
  check_values(n);
  auto xn = x.node(), vn = v.node();
  std::weak_ptr<Node> wn = n;
  n->backprop = [xn, vn, wn, m, nn]() {
    auto self = wn.lock();
    xn->ensure_grad();
    vn->ensure_grad();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < nn; ++j) {
        xn->grad[i * nn + j] += self->grad[i * nn + j];
        vn->grad[j] += self->grad[i * nn + j];
      }
  };
  return Tensor::wrap(n);
}

// ----- softmax / layer norm -----

Tensor softmax_lastdim(const Tensor& x) {
  require(x.rank() >= 1, "softmax_lastdim: rank >= 1");
  const int64_t nlast = x.dim(x.rank() - 1);
  require(nlast >= 1, "softmax_lastdim: empty last axis");
  const int64_t rows = x.numel() / nlast;
  std::vector<double> out(x.data().size());
  for (int64_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * nlast;
    double* o = out.data() + r * nlast;
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < nlast; ++j) mx = std::max(mx, in[j]);
    if (std::isinf(mx) && mx < 0)
      throw RuntimeFailure("softmax_lastdim: fully masked row (all -inf)");
    double s = 0.0;
    for (int64_t j = 0; j < nlast; ++j) {
      o[j] = std::isinf(in[j]) && in[j] < 0 ? 0.0 : std::exp(in[j] - mx);
      s += o[j];
    }
    for (int64_t j = 0; j < nlast; ++j) o[j] /= s;
  }
  auto n = make_node(x.shape(), std::move(out), {x.node()});
  check_values(n);
  auto xn = x.node();
  std::weak_ptr<Node> wn = n;
  n->backprop = [xn, wn, rows, nlast]() {
    auto self = wn.lock();
    xn->ensure_grad();
    for (int64_t r = 0; r < rows; ++r) {
      const double* y = self->data.data() + r * nlast;
      const double* g = self->grad.data() + r * nlast;
      double dot = 0.0;
      for (int64_t j = 0; j < nlast; ++j) dot += y[j] * g[j];
      for (int64_t j = 0; j < nlast; ++j) xn->grad[r * nlast + j] += y[j] * (g[j] - dot);
    }
  };
  return Tensor::wrap(n);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  require(x.rank() >= 1, "layer_norm: rank >= 1");
  const int64_t c = x.dim(x.rank() - 1);
  require(gain.rank() == 1 && gain.dim(0) == c && bias.rank() == 1 && bias.dim(0) == c,
          "layer_norm: gain/bias must be [C]");
  constexpr double eps = 1e-5;
  const int64_t rows = x.numel() / c;
  std::vector<double> out(x.data().size());
  std::vector<double> inv_std(static_cast<size_t>(rows));
  std::vector<double> xhat(x.data().size());
  for (int64_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * c;
    double mu = 0.0;
    for (int64_t j = 0; j < c; ++j) mu += in[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (int64_t j = 0; j < c; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(r)] = is;
    for (int64_t j = 0; j < c; ++j) {
      xhat[r * c + j] = (in[j] - mu) * is;
      out[r * c + j] = gain.data()[j] * xhat[r * c + j] + bias.data()[j];
    }
  }
  auto n = make_node(x.shape(), std::move(out), {x.node(), gain.node(), bias.node()});
  check_values(n);
  auto xn = x.node(), gn = gain.node(), bn = bias.node();
  std::weak_ptr<Node> wn = n;
  n->backprop = [xn, gn, bn, wn, rows, c, inv_std, xhat]() {
    auto self = wn.lock();
    xn->ensure_grad();
    gn->ensure_grad();
    bn->ensure_grad();
    for (int64_t r = 0; r < rows; ++r) {
      const double* g = self->grad.data() + r * c;
      const double* xh = xhat.data() + r * c;
      double sum_gg = 0.0, sum_ggx = 0.0;
      for (int64_t j = 0; j < c; ++j) {
        const double gg = g[j] * gn->data[j];
        sum_gg += gg;
        sum_ggx += gg * xh[j];
        gn->grad[j] += g[j] * xh[j];
        bn->grad[j] += g[j];
      }
      const double invc = 1.0 / static_cast<double>(c);
      for (int64_t j = 0; j < c; ++j) {
        const double gg = g[j] * gn->data[j];
        xn->grad[r * c + j] +=
            inv_std[static_cast<size_t>(r)] * (gg - invc * sum_gg - xh[j] * invc * sum_ggx);
      }
    }
  };
  return Tensor::wrap(n);
}

// ----- convolutions -----

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.rank() == 3, "conv2d: x must be [Cin,H,W]");
  require(w.rank() == 4 && w.dim(2) == 3 && w.dim(3) == 3, "conv2d: w must be [Cout,Cin,3,3]");
  require(w.dim(1) == x.dim(0), "conv2d: channel mismatch (w Cin=" +
                                    std::to_string(w.dim(1)) + ", x Cin=" +
                                    std::to_string(x.dim(0)) + ")");
  require(b.rank() == 1 && b.dim(0) == w.dim(0), "conv2d: bias must be [Cout]");
  const int64_t ci = x.dim(0), h = x.dim(1), ww = x.dim(2), co = w.dim(0);
  std::vector<double> out(static_cast<size_t>(co * h * ww));
  for (int64_t oc = 0; oc < co; ++oc) {
    for (int64_t y = 0; y < h; ++y)
      for (int64_t xx = 0; xx < ww; ++xx) {
        double acc = b.data()[oc];
        for (int64_t ic = 0; ic < ci; ++ic)
          for (int64_t ky = 0; ky < 3; ++ky) {
            const int64_t sy = y + ky - 1;
            if (sy < 0 || sy >= h) continue;
            for (int64_t kx = 0; kx < 3; ++kx) {
              const int64_t sx = xx + kx - 1;
              if (sx < 0 || sx >= ww) continue;
              acc += w.data()[((oc * ci + ic) * 3 + ky) * 3 + kx] *
                     x.data()[(ic * h + sy) * ww + sx];
            }
          }
        out[(oc * h + y) * ww + xx] = acc;
      }
  }
  auto n = make_node({co, h, ww}, std::move(out), {x.node(), w.node(), b.node()});
  check_values(n);
  auto xn = x.node(), wn2 = w.node(), bn = b.node();
  std::weak_ptr<Node> wn = n;
  n->backprop = [xn, wn2, bn, wn, ci, h, ww, co]() {
    auto self = wn.lock();
    xn->ensure_grad();
    wn2->ensure_grad();
    bn->ensure_grad();
    for (int64_t oc = 0; oc < co; ++oc)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t xx = 0; xx < ww; ++xx) {
          const double g = self->grad[(oc * h + y) * ww + xx];
          if (g == 0.0) continue;
          bn->grad[oc] += g;
          for (int64_t ic = 0; ic < ci; ++ic)
            for (int64_t ky = 0; ky < 3; ++ky) {
              const int64_t sy = y + ky - 1;
              if (sy < 0 || sy >= h) continue;
              for (int64_t kx = 0; kx < 3; ++kx) {
                const int64_t sx = xx + kx - 1;
                if (sx < 0 || sx >= ww) continue;
                wn2->grad[((oc * ci + ic) * 3 + ky) * 3 + kx] +=
                    g * xn->data[(ic * h + sy) * ww + sx];
                xn->grad[(ic * h + sy) * ww + sx] +=
                    g * wn2->data[((oc * ci + ic) * 3 + ky) * 3 + kx];
              }
            }
        }
  };
  return Tensor::wrap(n);
}

Tensor conv1x1(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.rank() == 3, "conv1x1: x must be [Cin,H,W]");
  require(w.rank() == 2 && w.dim(1) == x.dim(0), "conv1x1: w must be [Cout,Cin]");
  const int64_t h = x.dim(1), ww = x.dim(2);
  Tensor flat = reshape(x, {x.dim(0), h * ww});
  Tensor y = matmul(w, flat);
  y = reshape(y, {w.dim(0), h, ww});
  return channel_bias(y, b);
}

// ----- shape / gather ops -----

Tensor gather(const Tensor& x, const std::vector<int64_t>& idx, const Shape& out_shape) {
  require(shape_numel(out_shape) == static_cast<int64_t>(idx.size()),
          "gather: index count does not match output shape");
  std::vector<double> out(idx.size());
  const int64_t n_in = x.numel();
  for (size_t i = 0; i < idx.size(); ++i) {
    const int64_t j = idx[i];
    require(j < n_in, "gather: index out of range");
    out[i] = j < 0 ? 0.0 : x.data()[static_cast<size_t>(j)];
  }
  auto n = make_node(out_shape, std::move(out), {x.node()});
  n->allows_inf = x.allows_inf();
  check_values(n);
  auto xn = x.node();
  std::weak_ptr<Node> wn = n;
  auto idx_copy = std::make_shared<std::vector<int64_t>>(idx);
  n->backprop = [xn, wn, idx_copy]() {
    auto self = wn.lock();
    xn->ensure_grad();
    for (size_t i = 0; i < idx_copy->size(); ++i) {
      const int64_t j = (*idx_copy)[i];
      if (j >= 0) xn->grad[static_cast<size_t>(j)] += self->grad[i];
    }
  };
  return Tensor::wrap(n);
}

Tensor reshape(const Tensor& x, const Shape& s) {
  require(shape_numel(s) == x.numel(),
          "reshape: " + shape_str(x.shape()) + " to " + shape_str(s));
  auto n = make_node(s, x.data(), {x.node()});
  n->allows_inf = x.allows_inf();
  auto xn = x.node();
  std::weak_ptr<Node> wn = n;
  n->backprop = [xn, wn]() {
    auto self = wn.lock();
    xn->ensure_grad();
    for (size_t i = 0; i < self->grad.size(); ++i) xn->grad[i] += self->grad[i];
  };
  return Tensor::wrap(n);
}

Tensor concat0(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat0: empty input");
  Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  int64_t total0 = 0;
  bool inf = false;
  for (const auto& p : parts) {
    Shape t(p.shape().begin() + 1, p.shape().end());
    require(t == tail, "concat0: trailing dims differ");
    total0 += p.dim(0);
    inf = inf || p.allows_inf();
  }
  Shape out_shape;
  out_shape.push_back(total0);
  out_shape.insert(out_shape.end(), tail.begin(), tail.end());
  std::vector<double> out;
  out.reserve(static_cast<size_t>(shape_numel(out_shape)));
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
    parents.push_back(p.node());
  }
  auto n = make_node(out_shape, std::move(out), parents);
  n->allows_inf = inf;
  check_values(n);
  std::weak_ptr<Node> wn = n;
  n->backprop = [wn]() {
    auto self = wn.lock();
    size_t off = 0;
    for (auto& p : self->parents) {
      p->ensure_grad();
      for (size_t i = 0; i < p->data.size(); ++i) p->grad[i] += self->grad[off + i];
      off += p->data.size();
    }
  };
  return Tensor::wrap(n);
}

Tensor slice0(const Tensor& x, int64_t from, int64_t to) {
  require(x.rank() >= 1 && from >= 0 && to <= x.dim(0) && from < to, "slice0: bad range");
  const int64_t stride = x.numel() / x.dim(0);
  Shape s = x.shape();
  s[0] = to - from;
  std::vector<int64_t> idx;
  idx.reserve(static_cast<size_t>((to - from) * stride));
  for (int64_t i = from * stride; i < to * stride; ++i) idx.push_back(i);
  return gather(x, idx, s);
}

Tensor slice_cols(const Tensor& x, int64_t from, int64_t to) {
  require(x.rank() == 2 && from >= 0 && to <= x.dim(1) && from < to, "slice_cols: bad range");
  const int64_t m = x.dim(0), nn = x.dim(1);
  std::vector<int64_t> idx;
  idx.reserve(static_cast<size_t>(m * (to - from)));
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = from; j < to; ++j) idx.push_back(i * nn + j);
  return gather(x, idx, {m, to - from});
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: empty input");
  const int64_t m = parts[0].dim(0);
  for (const auto& p : parts)
    require(p.rank() == 2 && p.dim(0) == m, "concat_cols: row counts differ");
  // concat along axis 0 of the transposed parts, then transpose back
  std::vector<Tensor> tparts;
  tparts.reserve(parts.size());
  for (const auto& p : parts) tparts.push_back(transpose2d(p));
  return transpose2d(concat0(tparts));
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  auto n = make_node({1}, {s}, {x.node()});
  check_values(n);
  auto xn = x.node();
  std::weak_ptr<Node> wn = n;
  n->backprop = [xn, wn]() {
    auto self = wn.lock();
    xn->ensure_grad();
    const double g = self->grad[0];
    for (size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += g;
  };
  return Tensor::wrap(n);
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor reduce_sum0(const Tensor& x) {
  require(x.rank() >= 2, "reduce_sum0: rank >= 2");
  const int64_t c = x.dim(0), stride = x.numel() / c;
  Shape s(x.shape().begin() + 1, x.shape().end());
  std::vector<double> out(static_cast<size_t>(stride), 0.0);
  for (int64_t i = 0; i < c; ++i)
    for (int64_t j = 0; j < stride; ++j) out[static_cast<size_t>(j)] += x.data()[i * stride + j];
  auto n = make_node(s, std::move(out), {x.node()});
  check_values(n);
  auto xn = x.node();
  std::weak_ptr<Node> wn = n;
  n->backprop = [xn, wn, c, stride]() {
    auto self = wn.lock();
    xn->ensure_grad();
    for (int64_t i = 0; i < c; ++i)
      for (int64_t j = 0; j < stride; ++j) xn->grad[i * stride + j] += self->grad[static_cast<size_t>(j)];
  };
  return Tensor::wrap(n);
}

Tensor expand0(const Tensor& x, int64_t copies) {
  require(copies >= 1, "expand0: copies >= 1");
  Shape s;
  s.push_back(copies);
  s.insert(s.end(), x.shape().begin(), x.shape().end());
  const int64_t stride = x.numel();
  std::vector<double> out;
  out.reserve(static_cast<size_t>(copies * stride));
  for (int64_t i = 0; i < copies; ++i) out.insert(out.end(), x.data().begin(), x.data().end());
  auto n = make_node(s, std::move(out), {x.node()});
  check_values(n);
  auto xn = x.node();
  std::weak_ptr<Node> wn = n;
  n->backprop = [xn, wn, copies, stride]() {
    auto self = wn.lock();
    xn->ensure_grad();
    for (int64_t i = 0; i < copies; ++i)
      for (int64_t j = 0; j < stride; ++j) xn->grad[static_cast<size_t>(j)] += self->grad[i * stride + j];
  };
  return Tensor::wrap(n);
}

Tensor channel_scale(const Tensor& x, const Tensor& v) {
  require(x.rank() >= 1 && v.rank() == 1 && x.dim(0) == v.dim(0),
          "channel_scale: x[C,...] * v[C] expected");
  const int64_t c = x.dim(0), stride = x.numel() / c;
  std::vector<double> out(x.data().size());
  for (int64_t i = 0; i < c; ++i)
    for (int64_t j = 0; j < stride; ++j) out[i * stride + j] = x.data()[i * stride + j] * v.data()[i];
  auto n = make_node(x.shape(), std::move(out), {x.node(), v.node()});
  check_values(n);
  auto xn = x.node(), vn = v.node();
  std::weak_ptr<Node> wn = n;
  n->backprop = [xn, vn, wn, c, stride]() {
    auto self = wn.lock();
    xn->ensure_grad();
    vn->ensure_grad();
    for (int64_t i = 0; i < c; ++i)
      for (int64_t j = 0; j < stride; ++j) {
        xn->grad[i * stride + j] += self->grad[i * stride + j] * vn->data[i];
        vn->grad[i] += self->grad[i * stride + j] * xn->data[i * stride + j];
      }
  };
  return Tensor::wrap(n);
}

Tensor channel_bias(const Tensor& x, const Tensor& v) {
  require(x.rank() >= 1 && v.rank() == 1 && x.dim(0) == v.dim(0),
          "channel_bias: x[C,...] + v[C] expected");
  const int64_t c = x.dim(0), stride = x.numel() / c;
  std::vector<double> out(x.data().size());
  for (int64_t i = 0; i < c; ++i)
    for (int64_t j = 0; j < stride; ++j) out[i * stride + j] = x.data()[i * stride + j] + v.data()[i];
  auto n = make_node(x.shape(), std::move(out), {x.node(), v.node()});
  check_values(n);
  auto xn = x.node(), vn = v.node();
  std::weak_ptr<Node> wn = n;
  n->backprop = [xn, vn, wn, c, stride]() {
    auto self = wn.lock();
    xn->ensure_grad();
    vn->ensure_grad();
    for (int64_t i = 0; i < c; ++i)
      for (int64_t j = 0; j < stride; ++j) {
        xn->grad[i * stride + j] += self->grad[i * stride + j];
        vn->grad[i] += self->grad[i * stride + j];
      }
  };
  return Tensor::wrap(n);
}

Tensor pixel_shuffle(const Tensor& x, int r) {
  require(x.rank() == 3, "pixel_shuffle: x must be [C*r*r,H,W]");
  const int64_t cr2 = x.dim(0), h = x.dim(1), w = x.dim(2);
  require(r >= 1 && cr2 % (static_cast<int64_t>(r) * r) == 0,
          "pixel_shuffle: channels not divisible by r^2");
  const int64_t c = cr2 / (static_cast<int64_t>(r) * r);
  std::vector<int64_t> idx(static_cast<size_t>(cr2 * h * w));
  for (int64_t oc = 0; oc < c; ++oc)
    for (int64_t y = 0; y < h * r; ++y)
      for (int64_t xx = 0; xx < w * r; ++xx) {
        const int64_t ic = oc * r * r + (y % r) * r + (xx % r);
        idx[static_cast<size_t>((oc * h * r + y) * w * r + xx)] =
            (ic * h + y / r) * w + xx / r;
      }
  return gather(x, idx, {c, h * r, w * r});
}

Tensor pixel_unshuffle(const Tensor& x, int r) {
  require(x.rank() == 3, "pixel_unshuffle: x must be [C,rH,rW]");
  const int64_t c = x.dim(0), rh = x.dim(1), rw = x.dim(2);
  require(r >= 1 && rh % r == 0 && rw % r == 0, "pixel_unshuffle: extents not divisible by r");
  const int64_t h = rh / r, w = rw / r;
  std::vector<int64_t> idx(static_cast<size_t>(c * rh * rw));
  for (int64_t ic = 0; ic < c; ++ic)
    for (int64_t dy = 0; dy < r; ++dy)
      for (int64_t dx = 0; dx < r; ++dx)
        for (int64_t y = 0; y < h; ++y)
          for (int64_t xx = 0; xx < w; ++xx) {
            const int64_t oc = ic * r * r + dy * r + dx;
            idx[static_cast<size_t>((oc * h + y) * w + xx)] =
                (ic * rh + y * r + dy) * rw + xx * r + dx;
          }
  return gather(x, idx, {c * r * r, h, w});
}

Tensor shift2d(const Tensor& x, int dy, int dx) {
  require(x.rank() == 3, "shift2d: x must be [C,H,W]");
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<int64_t> idx(static_cast<size_t>(c * h * w));
  for (int64_t ic = 0; ic < c; ++ic)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t xx = 0; xx < w; ++xx) {
        const int64_t sy = y - dy, sx = xx - dx;
        idx[static_cast<size_t>((ic * h + y) * w + xx)] =
            (sy < 0 || sy >= h || sx < 0 || sx >= w) ? -1 : (ic * h + sy) * w + sx;
      }
  return gather(x, idx, x.shape());
}

Tensor inf_mask_const(const Shape& s, const std::vector<double>& vals) {
  require(shape_numel(s) == static_cast<int64_t>(vals.size()), "inf_mask_const: size mismatch");
  for (double v : vals)
    require(v == 0.0 || (std::isinf(v) && v < 0), "inf_mask_const: entries must be 0 or -inf");
  auto n = make_node(s, vals, {});
  n->allows_inf = true;
  return Tensor::wrap(n);
}

// ----- backward -----

void backward(const Tensor& loss) {
  if (loss.numel() != 1) throw ValidationError("backward: loss must be scalar");
  // iterative postorder topo sort
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* n;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node().get(), 0});
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.n->parents.size()) {
      Node* p = f.n->parents[f.next_parent++].get();
      if (!visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(f.n);
      stack.pop_back();
    }
  }
  // topo has parents before children; walk in reverse
  for (Node* n : topo) {
    n->ensure_grad();
    if (!n->is_leaf()) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  loss.node()->grad[0] = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop();
}

double finite_diff_check(const std::function<double(const std::vector<double>&)>& f,
                         Tensor& x, const std::vector<double>& analytic_grad, double h) {
  std::vector<double> v = x.data();
  double worst = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    const double orig = v[i];
    v[i] = orig + h;
    const double fp = f(v);
    v[i] = orig - h;
    const double fm = f(v);
    v[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = analytic_grad[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

}  // namespace semlens::num
