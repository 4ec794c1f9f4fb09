#ifndef SEMLENS_IMAGE_ALIGN_IMAGE_ALIGN_HPP
#define SEMLENS_IMAGE_ALIGN_IMAGE_ALIGN_HPP

#include <string>
#include <vector>

#include "model/params.hpp"
#include "semantics/extractor.hpp"

namespace semlens::align {

struct WindowSpec {
  int radius = 3;  // (2r+1)x(2r+1) local search window
  int heads = 1;
};

// Projections for the masked local attention. The value projection starts as
// the identity so the aligned output is a convex mix of supporting pixels.
struct AlignWeights {
  num::Tensor wq, wk, wv;  // [C,C]
  AlignWeights() = default;
  AlignWeights(ParamStore& ps, const std::string& name, int64_t c, num::Rng& rng);
  static AlignWeights identity(int64_t c);  // plain identities, no ParamStore
};

// Additive 0/-inf mask over (query pixel, window offset) pairs, [HW, K] with
// K = (2r+1)^2. An entry is 0 iff the reference pixel and the supporting
// pixel at that offset carry the same instance id (background included) and
// the offset stays on canvas. center_always_allowed forces the zero offset
// open so no row is fully masked.
num::Tensor build_attention_mask(const std::vector<uint16_t>& ref_labels,
                                 const std::vector<uint16_t>& sup_labels, int64_t h, int64_t w,
                                 const WindowSpec& spec, bool center_always_allowed = true);

// Warps supporting-frame features toward the reference: each reference pixel
// attends over its local window in the supporting frame under the mask.
// Logits are plain QK^T dot products (no sqrt(D) scaling). cache_attn, when
// given, receives the per-head [HW, K] rows stacked along axis 0.
num::Tensor masked_local_attention(const num::Tensor& f_ref, const num::Tensor& f_sup,
                                   const num::Tensor& mask, const WindowSpec& spec,
                                   const AlignWeights& w, num::Tensor* cache_attn = nullptr);

// Replaces every supporting frame by its masked attention against frame
// t_ref; the reference frame passes through untouched.
std::vector<num::Tensor> prealign_clip(const std::vector<num::Tensor>& features,
                                       const std::vector<std::vector<uint16_t>>& label_maps,
                                       int t_ref, const WindowSpec& spec, const AlignWeights& w);

}  // namespace semlens::align

#endif
