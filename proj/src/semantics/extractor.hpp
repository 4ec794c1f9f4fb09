#ifndef SEMLENS_SEMANTICS_EXTRACTOR_HPP
#define SEMLENS_SEMANTICS_EXTRACTOR_HPP

#include <vector>

#include "model/attention.hpp"
#include "model/dims.hpp"
#include "synthvid/generator.hpp"

namespace semlens::sem {

// Per-clip semantic priors: one global token per frame, video-wise instance
// tokens, a pooled background token, and an exclusive label map per frame.
struct SemanticBundle {
  std::vector<num::Tensor> global_tokens;       // T x [width]
  num::Tensor video_tokens;                     // [N_v, width]
  num::Tensor background_token;                 // [width]
  std::vector<num::Tensor> mask_logits;         // T x [N_v, H, W]; empty in oracle mode
  std::vector<std::vector<uint16_t>> label_maps;  // T x H*W exclusive ids (0 = background)
  int64_t width = 0;
  int64_t h = 0, w = 0;
};

class SemanticExtractor {
 public:
  SemanticExtractor(ParamStore& ps, const ModelDims& dims, num::Rng& rng);

  // Eq-1 style toy encoder: 3 stride-1 convs, output [C_s,H,W].
  num::Tensor frame_encode(const num::Tensor& lr_frame) const;

  // Two cross-attention layers. Layer 1 updates the queries from the pixel
  // features (no output projection, so zero queries pool the value
  // projections uniformly); layer 2 refines the pixel features from the
  // tokens behind a zero-initialized projection. Row N_f is the global token.
  struct FrameDecode {
    num::Tensor tokens;    // [N_f+1, C_s]
    num::Tensor features;  // [C_s, H, W]
  };
  FrameDecode frame_decode(const num::Tensor& f, const num::Tensor& queries) const;

  // Combined learned queries (frame query slots + class-embedding prior).
  num::Tensor combined_queries() const;

  // Temporal window self-attention per instance index; two blocks, the
  // second shifted. tokens_per_frame is T x [N_f, C_s].
  std::vector<num::Tensor> instance_encode(const std::vector<num::Tensor>& tokens_per_frame,
                                           int window_len, int shift) const;
  std::vector<num::Tensor> instance_encode(const std::vector<num::Tensor>& tokens_per_frame) const;

  // Aggregates all frames' encoded tokens into N_v video tokens via two
  // cross-attention blocks seeded by the learned video queries.
  num::Tensor instance_decode(const std::vector<num::Tensor>& encoded_per_frame,
                              num::Tensor* cache_attn = nullptr,
                              num::Tensor* cache_values = nullptr) const;

  // Per-pixel channel dot product of each video token with decoded features.
  std::vector<num::Tensor> predict_mask_logits(const num::Tensor& video_tokens,
                                               const std::vector<num::Tensor>& features) const;
  static std::vector<uint16_t> exclusive_label_map(const num::Tensor& logits, double bg_bias);
  double background_bias() const { return bg_bias_.data()[0]; }
  num::Tensor background_bias_param() const { return bg_bias_; }

  // Full learned pipeline over a clip's LR frames.
  SemanticBundle learned_bundle(const std::vector<num::Tensor>& lr_frames) const;

  // Ground-truth path: label maps from the generator, tokens pooled from
  // decoded features over the true instance regions.
  SemanticBundle oracle_bundle(const vid::VideoClip& clip) const;

  // Shared linear projection C_s -> C applied to every token.
  SemanticBundle compress(const SemanticBundle& bundle) const;

  // Mask supervision loss (per-pixel BCE of logits against ground truth).
  num::Tensor mask_bce_loss(const std::vector<num::Tensor>& mask_logits,
                            const std::vector<std::vector<uint16_t>>& gt_labels) const;

  const ModelDims& dims() const { return dims_; }
  num::Tensor video_queries() const { return video_queries_; }

 private:
  ModelDims dims_;
  Conv3x3 enc1_, enc2_, enc3_;
  num::Tensor frame_queries_;  // [N_f+1, C_s]
  num::Tensor class_embed_;    // [N_c, C_s]
  AttnProj dec_tok_;           // tokens <- pixels, no out projection
  AttnProj dec_pix_;           // pixels <- tokens, zero-init out
  LayerNorm enc_norm1_, enc_norm2_;
  AttnProj tenc1_, tenc2_;
  FeedForward tff1_, tff2_;
  num::Tensor video_queries_;  // [N_v, C_s]
  LayerNorm vdec_norm1_, vdec_norm2_;
  AttnProj vdec1_, vdec2_;
  FeedForward vff1_, vff2_;
  num::Tensor bg_bias_;  // scalar competing in the label-map argmax
  Linear compress_;      // C_s -> C

  num::Tensor pooled_token(const num::Tensor& feat_flat, const std::vector<int64_t>& pixels,
                           bool normalize) const;
};

// Intersection-over-union of two exclusive label maps for a given id.
double mask_iou(const std::vector<uint16_t>& a, const std::vector<uint16_t>& b, uint16_t id);

}  // namespace semlens::sem

#endif
