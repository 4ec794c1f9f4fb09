#include "image_align/image_align.hpp"

#include <cmath>
#include <limits>

namespace semlens::align {

using num::Tensor;

AlignWeights::AlignWeights(ParamStore& ps, const std::string& name, int64_t c, num::Rng& rng) {
  wq = ps.uniform_fan_in(name + ".wq", {c, c}, c, rng);
  wk = ps.uniform_fan_in(name + ".wk", {c, c}, c, rng);
  wv = ps.identity2d(name + ".wv", c);
}

AlignWeights AlignWeights::identity(int64_t c) {
  std::vector<double> eye(static_cast<size_t>(c * c), 0.0);
  for (int64_t i = 0; i < c; ++i) eye[static_cast<size_t>(i * c + i)] = 1.0;
  AlignWeights w;
  w.wq = Tensor::from_data({c, c}, eye);
  w.wk = Tensor::from_data({c, c}, eye);
  w.wv = Tensor::from_data({c, c}, eye);
  return w;
}

Tensor build_attention_mask(const std::vector<uint16_t>& ref_labels,
                            const std::vector<uint16_t>& sup_labels, int64_t h, int64_t w,
                            const WindowSpec& spec, bool center_always_allowed) {
  if (spec.radius < 0) throw ValidationError("build_attention_mask: radius must be >= 0");
  const size_t hw = static_cast<size_t>(h * w);
  if (ref_labels.size() != hw || sup_labels.size() != hw)
    throw ValidationError("build_attention_mask: label map size mismatch");
  const int64_t side = 2 * spec.radius + 1;
  const int64_t k = side * side;
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> mask(hw * static_cast<size_t>(k), ninf);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const size_t p = static_cast<size_t>(y * w + x);
      for (int64_t dy = -spec.radius; dy <= spec.radius; ++dy) {
        for (int64_t dx = -spec.radius; dx <= spec.radius; ++dx) {
          const int64_t sy = y + dy, sx = x + dx;
          const size_t o = static_cast<size_t>((dy + spec.radius) * side + (dx + spec.radius));
          if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
          if (ref_labels[p] == sup_labels[static_cast<size_t>(sy * w + sx)])
            mask[p * static_cast<size_t>(k) + o] = 0.0;
        }
      }
      if (center_always_allowed) {
        const size_t center = static_cast<size_t>(spec.radius * side + spec.radius);
        mask[p * static_cast<size_t>(k) + center] = 0.0;
      }
    }
  }
  return num::inf_mask_const({static_cast<int64_t>(hw), k}, mask);
}

Tensor masked_local_attention(const Tensor& f_ref, const Tensor& f_sup, const Tensor& mask,
                              const WindowSpec& spec, const AlignWeights& w,
                              Tensor* cache_attn) {
  if (f_ref.shape() != f_sup.shape() || f_ref.rank() != 3)
    throw ValidationError("masked_local_attention: feature shape mismatch");
  const int64_t c = f_ref.dim(0), h = f_ref.dim(1), wd = f_ref.dim(2);
  const int64_t side = 2 * spec.radius + 1, k = side * side, hw = h * wd;
  if (mask.shape() != num::Shape({hw, k}))
    throw ValidationError("masked_local_attention: mask shape mismatch");
  if (c % spec.heads != 0)
    throw ValidationError("masked_local_attention: C not divisible by heads");
  const int64_t dch = c / spec.heads;

  Tensor zb = Tensor::zeros({c});
  Tensor q = num::conv1x1(f_ref, w.wq, zb);
  Tensor key = num::conv1x1(f_sup, w.wk, zb);
  Tensor val = num::conv1x1(f_sup, w.wv, zb);

  // supporting-frame tensors sampled at each window offset
  std::vector<Tensor> k_off, v_off;
  for (int64_t dy = -spec.radius; dy <= spec.radius; ++dy) {
    for (int64_t dx = -spec.radius; dx <= spec.radius; ++dx) {
      // out(y,x) = sup(y+dy, x+dx)
      k_off.push_back(num::shift2d(key, static_cast<int>(-dy), static_cast<int>(-dx)));
      v_off.push_back(num::shift2d(val, static_cast<int>(-dy), static_cast<int>(-dx)));
    }
  }

  std::vector<Tensor> head_outs, head_attns;
  for (int hd = 0; hd < spec.heads; ++hd) {
    Tensor qh = num::slice0(q, hd * dch, (hd + 1) * dch);
    std::vector<Tensor> logit_cols;
    for (int64_t o = 0; o < k; ++o) {
      Tensor kh = num::slice0(k_off[static_cast<size_t>(o)], hd * dch, (hd + 1) * dch);
      logit_cols.push_back(
          num::reshape(num::reduce_sum0(num::mul(qh, kh)), {hw, 1}));
    }
    Tensor a = num::softmax_lastdim(num::add(num::concat_cols(logit_cols), mask));
    if (cache_attn) head_attns.push_back(a);
    Tensor acc = Tensor::zeros({dch, h, wd});
    for (int64_t o = 0; o < k; ++o) {
      Tensor vh = num::slice0(v_off[static_cast<size_t>(o)], hd * dch, (hd + 1) * dch);
      Tensor ao = num::expand0(num::reshape(num::slice_cols(a, o, o + 1), {h, wd}), dch);
      acc = num::add(acc, num::mul(ao, vh));
    }
    head_outs.push_back(acc);
  }
  if (cache_attn)
    *cache_attn = spec.heads == 1 ? head_attns[0] : num::concat0(head_attns);
  return spec.heads == 1 ? head_outs[0] : num::concat0(head_outs);
}

std::vector<Tensor> prealign_clip(const std::vector<Tensor>& features,
                                  const std::vector<std::vector<uint16_t>>& label_maps,
                                  int t_ref, const WindowSpec& spec, const AlignWeights& w) {
  if (features.size() != label_maps.size())
    throw ValidationError("prealign_clip: one label map per frame required");
  if (t_ref < 0 || static_cast<size_t>(t_ref) >= features.size())
    throw ValidationError("prealign_clip: reference index out of range");
  const Tensor& ref = features[static_cast<size_t>(t_ref)];
  std::vector<Tensor> out;
  for (size_t t = 0; t < features.size(); ++t) {
    if (static_cast<int>(t) == t_ref) {
      out.push_back(ref);
      continue;
    }
    Tensor mask = build_attention_mask(label_maps[static_cast<size_t>(t_ref)], label_maps[t],
                                       ref.dim(1), ref.dim(2), spec);
    out.push_back(masked_local_attention(ref, features[t], mask, spec, w));
  }
  return out;
}

}  // namespace semlens::align
