#include "model/attention.hpp"

#include <cmath>

namespace semlens {

using num::Tensor;

AttnProj::AttnProj(ParamStore& ps, const std::string& name, int64_t c, num::Rng& rng,
                   bool with_out)
    : q(ps, name + ".q", c, c, rng),
      k(ps, name + ".k", c, c, rng),
      v(ps, name + ".v", c, c, rng),
      has_out(with_out) {
  if (with_out) out = Linear(ps, name + ".out", c, c, rng, /*zero_init=*/true);
}

Tensor multihead_attention(const Tensor& q_in, const Tensor& kv_in, const AttnProj& w,
                           int heads, bool scale_logits, const Tensor* add_mask,
                           Tensor* cache_attn, Tensor* cache_values) {
  const int64_t c = q_in.dim(1);
  if (c % heads != 0) throw ValidationError("multihead_attention: C not divisible by heads");
  const int64_t d = c / heads;
  Tensor q = w.q.forward(q_in);
  Tensor k = w.k.forward(kv_in);
  Tensor v = w.v.forward(kv_in);
  std::vector<Tensor> head_outs, head_attns;
  for (int h = 0; h < heads; ++h) {
    Tensor qh = num::slice_cols(q, h * d, (h + 1) * d);
    Tensor kh = num::slice_cols(k, h * d, (h + 1) * d);
    Tensor vh = num::slice_cols(v, h * d, (h + 1) * d);
    Tensor logits = num::matmul(qh, num::transpose2d(kh));
    if (scale_logits) logits = num::scale(logits, 1.0 / std::sqrt(static_cast<double>(d)));
    if (add_mask) logits = num::add(logits, *add_mask);
    Tensor a = num::softmax_lastdim(logits);
    if (cache_attn) head_attns.push_back(a);
    head_outs.push_back(num::matmul(a, vh));
  }
  if (cache_attn) *cache_attn = heads == 1 ? head_attns[0] : num::concat0(head_attns);
  if (cache_values) *cache_values = v;
  Tensor o = heads == 1 ? head_outs[0] : num::concat_cols(head_outs);
  return w.has_out ? w.out.forward(o) : o;
}

FeedForward::FeedForward(ParamStore& ps, const std::string& name, int64_t c,
                         int64_t expansion, num::Rng& rng)
    : fc1(ps, name + ".fc1", c, c * expansion, rng),
      fc2(ps, name + ".fc2", c * expansion, c, rng, /*zero_init=*/true),
      norm(ps, name + ".norm", c) {}

Tensor FeedForward::forward(const Tensor& x) const {
  return num::add(x, fc2.forward(num::relu(fc1.forward(norm.forward(x)))));
}

}  // namespace semlens
