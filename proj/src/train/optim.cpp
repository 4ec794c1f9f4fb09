#include "train/optim.hpp"

#include <cmath>

namespace semlens::train {

double cosine_lr(uint64_t step, uint64_t total, double lr0, double lr_min) {
  if (total <= 1) return lr0;
  const double t = static_cast<double>(step) / static_cast<double>(total - 1);
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(M_PI * std::min(1.0, t)));
}

void adamw_step(ParamStore& params, OptimMoments& opt, const AdamWConfig& cfg) {
  opt.step += 1;
  const double t = static_cast<double>(opt.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, p] : params.all()) {
    if (!p.has_grad()) continue;
    auto& g = p.grad();
    auto& m = opt.m[name];
    auto& v = opt.v[name];
    if (m.empty()) m.assign(g.size(), 0.0);
    if (v.empty()) v.assign(g.size(), 0.0);
    auto& w = p.mutable_data();
    for (size_t i = 0; i < g.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * w[i]);
    }
  }
}

}  // namespace semlens::train
