#ifndef SEMLENS_MODEL_ATTENTION_HPP
#define SEMLENS_MODEL_ATTENTION_HPP

#include <string>

#include "model/params.hpp"

namespace semlens {

struct AttnProj {
  Linear q, k, v, out;
  bool has_out = true;
  AttnProj() = default;
  // When with_out, the output projection is zero-initialized so the
  // surrounding residual block starts as the identity.
  AttnProj(ParamStore& ps, const std::string& name, int64_t c, num::Rng& rng,
           bool with_out = true);
};

// Multi-head attention of queries [Lq,C] over keys/values [Lk,C].
// add_mask, when given, is a [Lq,Lk] additive 0/-inf tensor merged into the
// logits. cache_attn receives the concatenated per-head attention rows.
num::Tensor multihead_attention(const num::Tensor& q_in, const num::Tensor& kv_in,
                                const AttnProj& w, int heads, bool scale_logits,
                                const num::Tensor* add_mask = nullptr,
                                num::Tensor* cache_attn = nullptr,
                                num::Tensor* cache_values = nullptr);

struct FeedForward {
  Linear fc1, fc2;  // fc2 zero-init: residual block is the identity at init
  LayerNorm norm;
  FeedForward() = default;
  FeedForward(ParamStore& ps, const std::string& name, int64_t c, int64_t expansion,
              num::Rng& rng);
  num::Tensor forward(const num::Tensor& x) const;  // x + fc2(relu(fc1(ln(x))))
};

}  // namespace semlens

#endif
