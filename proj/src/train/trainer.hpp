#ifndef SEMLENS_TRAIN_TRAINER_HPP
#define SEMLENS_TRAIN_TRAINER_HPP

#include <string>
#include <vector>

#include "enhancer/enhancer.hpp"
#include "model/checkpoint.hpp"
#include "model/config.hpp"
#include "train/metrics.hpp"

namespace semlens::train {

// The full model: semantic extractor + pixel enhancer over one ParamStore.
// Construction order (and thus RNG consumption) is fixed, so identical
// (config, seed) gives bit-identical initial parameters.
struct Model {
  RunConfig cfg;
  ModelDims dims;
  ParamStore ps;
  num::Rng rng;
  bool learned_extractor = false;
  sem::SemanticExtractor extractor;
  enh::Enhancer enhancer;

  explicit Model(const RunConfig& cfg_);

  // Compressed bundle (width C); full, when given, receives the
  // uncompressed bundle carrying the mask logits.
  sem::SemanticBundle bundle_for(const vid::VideoClip& clip,
                                 sem::SemanticBundle* full = nullptr) const;

  // SR of the clip's frame t_ref (unclamped).
  num::Tensor infer(const vid::VideoClip& clip, int t_ref) const;
};

struct TrainResult {
  std::string checkpoint_path;
  std::string metrics_path;
  std::vector<double> losses;  // one entry per step
};

// Deterministic training loop over the dataset's train split; writes the
// final checkpoint and a metrics CSV of the val split into out_dir.
TrainResult train_run(const RunConfig& cfg, const std::string& dataset_dir,
                      const std::string& out_dir);

// Middle-frame metrics per clip (deterministic order).
std::vector<MetricsRecord> evaluate_clips(const Model& model,
                                          const std::vector<vid::VideoClip>& clips,
                                          const std::vector<std::string>& ids);

// Gradient-magnitude attribution of the target SR patch w.r.t. each LR input
// frame; maps are [H,W], jointly normalized to [0,1].
std::vector<num::Tensor> attribute(const Model& model, const vid::VideoClip& clip, int t_ref,
                                   int64_t y0, int64_t x0, int64_t ph, int64_t pw);

// Dataset loading helpers shared by trainer and CLI.
std::vector<vid::VideoClip> load_split(const std::string& dataset_dir, const RunConfig& cfg,
                                       const std::string& split, std::vector<std::string>* ids);
vid::DatasetParams dataset_params(const RunConfig& cfg);

}  // namespace semlens::train

#endif
