#include "model/params.hpp"

#include <cmath>

namespace semlens {

using num::Rng;
using num::Shape;
using num::Tensor;

Tensor ParamStore::add(const std::string& name, const Shape& shape, std::vector<double> init) {
  if (params_.count(name)) throw ValidationError("duplicate parameter name: " + name);
  Tensor t = Tensor::param(shape, std::move(init));
  params_.emplace(name, t);
  return t;
}

Tensor ParamStore::zeros(const std::string& name, const Shape& shape) {
  return add(name, shape, std::vector<double>(static_cast<size_t>(num::shape_numel(shape)), 0.0));
}

Tensor ParamStore::uniform_fan_in(const std::string& name, const Shape& shape, int64_t fan_in,
                                  Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<int64_t>(1, fan_in)));
  std::vector<double> init(static_cast<size_t>(num::shape_numel(shape)));
  for (auto& v : init) v = rng.uniform(-bound, bound);
  return add(name, shape, std::move(init));
}

Tensor ParamStore::identity2d(const std::string& name, int64_t n) {
  std::vector<double> init(static_cast<size_t>(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i) init[static_cast<size_t>(i * n + i)] = 1.0;
  return add(name, {n, n}, std::move(init));
}

Tensor ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValidationError("unknown parameter: " + name);
  return it->second;
}

int64_t ParamStore::total_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [name, t] : params_) t.zero_grad();
}

Linear::Linear(ParamStore& ps, const std::string& name, int64_t in, int64_t out, Rng& rng,
               bool zero_init) {
  w = zero_init ? ps.zeros(name + ".w", {out, in})
                : ps.uniform_fan_in(name + ".w", {out, in}, in, rng);
  b = ps.zeros(name + ".b", {out});
}

Tensor Linear::forward(const Tensor& x) const {
  return num::add_rowvec(num::matmul(x, num::transpose2d(w)), b);
}

Conv3x3::Conv3x3(ParamStore& ps, const std::string& name, int64_t in, int64_t out, Rng& rng,
                 bool zero_init) {
  w = zero_init ? ps.zeros(name + ".w", {out, in, 3, 3})
                : ps.uniform_fan_in(name + ".w", {out, in, 3, 3}, in * 9, rng);
  b = ps.zeros(name + ".b", {out});
}

Tensor Conv3x3::forward(const Tensor& x) const { return num::conv2d(x, w, b); }

Conv1x1::Conv1x1(ParamStore& ps, const std::string& name, int64_t in, int64_t out, Rng& rng,
                 bool zero_init, bool identity_init) {
  if (identity_init) {
    if (in < out) throw ValidationError("Conv1x1 identity init needs in >= out");
    std::vector<double> init(static_cast<size_t>(out * in), 0.0);
    for (int64_t i = 0; i < out; ++i) init[static_cast<size_t>(i * in + i)] = 1.0;
    w = ps.add(name + ".w", {out, in}, std::move(init));
  } else {
    w = zero_init ? ps.zeros(name + ".w", {out, in})
                  : ps.uniform_fan_in(name + ".w", {out, in}, in, rng);
  }
  b = ps.zeros(name + ".b", {out});
}

Tensor Conv1x1::forward(const Tensor& x) const { return num::conv1x1(x, w, b); }

LayerNorm::LayerNorm(ParamStore& ps, const std::string& name, int64_t c) {
  gain = ps.add(name + ".gain", {c}, std::vector<double>(static_cast<size_t>(c), 1.0));
  bias = ps.zeros(name + ".bias", {c});
}

Tensor LayerNorm::forward(const Tensor& x) const { return num::layer_norm(x, gain, bias); }

}  // namespace semlens
