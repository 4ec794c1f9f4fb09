#ifndef SEMLENS_MODEL_CHECKPOINT_HPP
#define SEMLENS_MODEL_CHECKPOINT_HPP

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "model/params.hpp"

namespace semlens {

struct OptimMoments {
  std::map<std::string, std::vector<double>> m, v;  // keyed by parameter name
  uint64_t step = 0;
};

struct CheckpointData {
  std::map<std::string, std::pair<num::Shape, std::vector<double>>> tensors;
  OptimMoments opt;
  uint64_t rng_state = 0;
  bool rng_has_cache = false;
  double rng_cache = 0.0;
  std::string config_sha_hex;  // 64 hex chars
};

// Binary container, magic "SLCKPT1\0", f64 payloads little-endian.
// load(save(x)) is bit-identical.
void save_checkpoint(const std::string& path, const ParamStore& params,
                     const OptimMoments& opt, const num::Rng& rng,
                     const std::string& config_sha_hex);
CheckpointData load_checkpoint(const std::string& path);

// Copies checkpoint tensors into an already-constructed store; shape
// mismatches or missing names are errors.
void apply_checkpoint(const CheckpointData& ckpt, ParamStore& params);

}  // namespace semlens

#endif
