#ifndef SEMLENS_TRAIN_OPTIM_HPP
#define SEMLENS_TRAIN_OPTIM_HPP

#include "model/checkpoint.hpp"

namespace semlens::train {

struct AdamWConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double weight_decay = 1e-4;
  double eps = 1e-8;
};

// Cosine decay from lr0 at step 0 to lr_min at step total-1.
double cosine_lr(uint64_t step, uint64_t total, double lr0, double lr_min);

// One decoupled-weight-decay Adam update over every parameter that has a
// gradient; allocates moment buffers on first touch and advances opt.step.
void adamw_step(ParamStore& params, OptimMoments& opt, const AdamWConfig& cfg);

}  // namespace semlens::train

#endif
