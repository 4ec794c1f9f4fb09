#ifndef SEMLENS_ENHANCER_ENHANCER_HPP
#define SEMLENS_ENHANCER_ENHANCER_HPP

#include <string>
#include <vector>

#include "image_align/image_align.hpp"
#include "model/attention.hpp"
#include "model/dims.hpp"
#include "space/space.hpp"

namespace semlens::enh {

// Splits T frames into win x win spatial windows over a reflectively padded
// canvas; each returned matrix holds the T*win*win tokens of one window.
// (sy, sx) shift the partition grid.
std::vector<num::Tensor> window_partition(const std::vector<num::Tensor>& frames, int win,
                                          int sy, int sx);
// Exact inverse of window_partition back onto the original (cropped) canvas.
std::vector<num::Tensor> window_reverse(const std::vector<num::Tensor>& windows, int win,
                                        int sy, int sx, int t_frames, int64_t c, int64_t h,
                                        int64_t w);

// One multi-frame self-attention block: pre-norm window attention over all T
// frames jointly plus a feed-forward, both residual. Odd blocks shift the
// window grid by win/2.
struct MfsabBlock {
  LayerNorm norm;
  AttnProj attn;
  FeedForward ff;
  int win = 8;
  int heads = 2;
  bool shifted = false;
  MfsabBlock() = default;
  MfsabBlock(ParamStore& ps, const std::string& name, const ModelDims& dims, bool shifted_,
             num::Rng& rng);
  std::vector<num::Tensor> forward(const std::vector<num::Tensor>& frames,
                                   std::vector<num::Tensor>* cache_attn = nullptr) const;
};

class Enhancer {
 public:
  Enhancer(ParamStore& ps, const ModelDims& dims, num::Rng& rng);

  // Shallow per-frame features from the 2-conv stem.
  num::Tensor stem(const num::Tensor& lr_frame) const;

  // Four propagation branches (backward, forward, backward, forward); each
  // frame fuses its pre-aligned order-1/order-2 predecessors, then SPACE and
  // the MFSAB stack run over the whole branch.
  std::vector<num::Tensor> propagate(const std::vector<num::Tensor>& lr_frames,
                                     const sem::SemanticBundle& bundle) const;

  // Reconstruction head + bicubic x4 residual of the LR reference.
  num::Tensor reconstruct(const num::Tensor& features, const num::Tensor& lr_ref) const;

  // propagate then reconstruct frame t_ref (0-based).
  num::Tensor forward_full(const std::vector<num::Tensor>& lr_frames,
                           const sem::SemanticBundle& bundle, int t_ref) const;

  const ModelDims& dims() const { return dims_; }

 private:
  struct Branch {
    bool backward = false;
    align::AlignWeights align;
    Conv1x1 fuse;  // 3C -> C, identity on the current-feature channels
    std::vector<space::SpaceBlock> spaces;
    std::vector<MfsabBlock> blocks;
  };

  ModelDims dims_;
  Conv3x3 stem1_, stem2_;
  std::vector<Branch> branches_;
  Conv3x3 rec1_, rec2_, rec3_;  // C->4C, C->4C, C->3 (zero-init)
};

}  // namespace semlens::enh

#endif
