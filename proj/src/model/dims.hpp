#ifndef SEMLENS_MODEL_DIMS_HPP
#define SEMLENS_MODEL_DIMS_HPP

#include "model/config.hpp"

namespace semlens {

// Model hyperparameters resolved from a RunConfig.
struct ModelDims {
  int64_t C = 16;    // propagation feature width
  int64_t C_s = 32;  // semantic token width
  int64_t N_f = 4;   // instance tokens per frame
  int64_t N_v = 4;   // video-wise instance tokens
  int64_t N_c = 4;   // learned class embeddings
  int blocks = 2;    // MFSAB blocks per branch
  int heads = 2;
  int win = 8;       // MFSAB spatial window
  int radius = 3;    // IMAGE local search radius
  int twin = 2;      // temporal window of the instance encoder
  int tshift = 1;
  bool space_every_block = true;
  bool isee_scaling = true;  // divide ISEE logits by sqrt(D)
  bool enable_gps = true;
  bool enable_isee = true;
  bool enable_image = true;
  int scale = 4;

  static ModelDims from_config(const RunConfig& cfg) {
    ModelDims d;
    d.C = cfg.get_int("model.C");
    d.C_s = cfg.get_int("model.C_s");
    d.N_f = cfg.get_int("model.N_f");
    d.N_v = cfg.get_int("model.N_v");
    d.N_c = cfg.get_int("model.N_c");
    d.blocks = static_cast<int>(cfg.get_int("model.blocks"));
    d.heads = static_cast<int>(cfg.get_int("model.heads"));
    d.win = static_cast<int>(cfg.get_int("model.win"));
    d.radius = static_cast<int>(cfg.get_int("model.r"));
    d.twin = static_cast<int>(cfg.get_int("model.w"));
    d.tshift = static_cast<int>(cfg.get_int("model.shift"));
    d.space_every_block = cfg.get_bool("model.space_every_block");
    d.isee_scaling = cfg.get_bool("model.isee_scaling");
    d.enable_gps = cfg.get_bool("model.enable_gps");
    d.enable_isee = cfg.get_bool("model.enable_isee");
    d.enable_image = cfg.get_bool("model.enable_image");
    d.scale = static_cast<int>(cfg.get_int("data.scale"));
    return d;
  }
};

}  // namespace semlens

#endif
