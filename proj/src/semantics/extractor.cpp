#include "semantics/extractor.hpp"

#include <algorithm>
#include <cmath>

namespace semlens::sem {

using num::Rng;
using num::Shape;
using num::Tensor;

namespace {

// [C,H,W] -> [HW,C]
Tensor flatten_pixels(const Tensor& f) {
  return num::transpose2d(num::reshape(f, {f.dim(0), f.dim(1) * f.dim(2)}));
}

Tensor l2_normalize(const Tensor& t) {
  Tensor n2 = num::sum(num::mul(t, t));
  if (n2.item() == 0.0) return t;  // absent instance keeps its zero token
  Tensor inv = num::exp_t(num::scale(num::log_t(num::add_scalar(n2, 1e-24)), -0.5));
  return num::mul(t, num::reshape(num::expand0(inv, t.dim(0)), t.shape()));
}

}  // namespace

SemanticExtractor::SemanticExtractor(ParamStore& ps, const ModelDims& dims, Rng& rng)
    : dims_(dims),
      enc1_(ps, "sem.enc1", 3, dims.C_s, rng),
      enc2_(ps, "sem.enc2", dims.C_s, dims.C_s, rng),
      enc3_(ps, "sem.enc3", dims.C_s, dims.C_s, rng),
      dec_tok_(ps, "sem.dec_tok", dims.C_s, rng, /*with_out=*/false),
      dec_pix_(ps, "sem.dec_pix", dims.C_s, rng),
      enc_norm1_(ps, "sem.tenc1.norm", dims.C_s),
      enc_norm2_(ps, "sem.tenc2.norm", dims.C_s),
      tenc1_(ps, "sem.tenc1.attn", dims.C_s, rng),
      tenc2_(ps, "sem.tenc2.attn", dims.C_s, rng),
      tff1_(ps, "sem.tenc1.ff", dims.C_s, 2, rng),
      tff2_(ps, "sem.tenc2.ff", dims.C_s, 2, rng),
      vdec_norm1_(ps, "sem.vdec1.norm", dims.C_s),
      vdec_norm2_(ps, "sem.vdec2.norm", dims.C_s),
      vdec1_(ps, "sem.vdec1.attn", dims.C_s, rng),
      vdec2_(ps, "sem.vdec2.attn", dims.C_s, rng),
      vff1_(ps, "sem.vdec1.ff", dims.C_s, 2, rng),
      vff2_(ps, "sem.vdec2.ff", dims.C_s, 2, rng),
      compress_(ps, "sem.compress", dims.C_s, dims.C, rng) {
  auto init_rows = [&](int64_t rows) {
    std::vector<double> v(static_cast<size_t>(rows * dims.C_s));
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims.C_s));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return v;
  };
  frame_queries_ = ps.add("sem.frame_queries", {dims.N_f + 1, dims.C_s},
                          init_rows(dims.N_f + 1));
  class_embed_ = ps.add("sem.class_embed", {dims.N_c, dims.C_s}, init_rows(dims.N_c));
  video_queries_ = ps.add("sem.video_queries", {dims.N_v, dims.C_s}, init_rows(dims.N_v));
  bg_bias_ = ps.zeros("sem.bg_bias", {1});
}

Tensor SemanticExtractor::frame_encode(const Tensor& lr_frame) const {
  if (lr_frame.rank() != 3 || lr_frame.dim(0) != 3)
    throw ValidationError("frame_encode: expected [3,H,W]");
  Tensor f = num::relu(enc1_.forward(lr_frame));
  f = num::relu(enc2_.forward(f));
  return enc3_.forward(f);
}

Tensor SemanticExtractor::combined_queries() const {
  // instance query slots carry a shared class-embedding prior
  Tensor cls_mean = num::scale(
      num::reshape(num::reduce_sum0(num::reshape(class_embed_, {dims_.N_c, dims_.C_s, 1})),
                   {1, dims_.C_s}),
      1.0 / static_cast<double>(dims_.N_c));
  std::vector<Tensor> rows;
  for (int64_t i = 0; i < dims_.N_f; ++i)
    rows.push_back(num::add(num::slice0(frame_queries_, i, i + 1), cls_mean));
  rows.push_back(num::slice0(frame_queries_, dims_.N_f, dims_.N_f + 1));
  return num::concat0(rows);
}

SemanticExtractor::FrameDecode SemanticExtractor::frame_decode(const Tensor& f,
                                                               const Tensor& queries) const {
  if (queries.rank() != 2 || queries.dim(0) != dims_.N_f + 1 || queries.dim(1) != dims_.C_s)
    throw ValidationError("frame_decode: queries must be [N_f+1, C_s]");
  Tensor pixels = flatten_pixels(f);  // [HW, C_s]
  Tensor tokens = num::add(queries,
                           multihead_attention(queries, pixels, dec_tok_, 1, true));
  Tensor refined = num::add(pixels, multihead_attention(pixels, tokens, dec_pix_, 1, true));
  FrameDecode out;
  out.tokens = tokens;
  out.features = num::reshape(num::transpose2d(refined), f.shape());
  return out;
}

std::vector<Tensor> SemanticExtractor::instance_encode(
    const std::vector<Tensor>& tokens_per_frame) const {
  return instance_encode(tokens_per_frame, dims_.twin, dims_.tshift);
}

std::vector<Tensor> SemanticExtractor::instance_encode(
    const std::vector<Tensor>& tokens_per_frame, int window_len, int shift) const {
  if (window_len < 1) throw ValidationError("instance_encode: window length >= 1");
  const int t_len = static_cast<int>(tokens_per_frame.size());
  const int64_t n_f = dims_.N_f;

  // window starts at -offset, covering [start, start+w) clipped to [0,T);
  // clipping is equivalent to padding with fully masked slots
  auto windows = [&](int offset) {
    std::vector<std::pair<int, int>> spans;
    for (int start = -offset; start < t_len; start += window_len) {
      const int a = std::max(0, start), b = std::min(t_len, start + window_len);
      if (a < b) spans.emplace_back(a, b);
    }
    return spans;
  };

  auto block = [&](std::vector<Tensor>& seqs, const AttnProj& attn, const FeedForward& ff,
                   const LayerNorm& norm, int offset) {
    for (auto& seq : seqs) {  // one [T, C_s] sequence per instance index
      Tensor ln = norm.forward(seq);
      std::vector<Tensor> outs;
      for (auto [a, b] : windows(offset)) {
        Tensor win_q = num::slice0(ln, a, b);
        outs.push_back(multihead_attention(win_q, win_q, attn, 1, true));
      }
      seq = num::add(seq, num::concat0(outs));
      seq = ff.forward(seq);
    }
  };

  // regroup per instance index
  std::vector<Tensor> seqs;
  for (int64_t i = 0; i < n_f; ++i) {
    std::vector<Tensor> rows;
    for (const auto& frame_tokens : tokens_per_frame)
      rows.push_back(num::slice0(frame_tokens, i, i + 1));
    seqs.push_back(num::concat0(rows));
  }
  block(seqs, tenc1_, tff1_, enc_norm1_, 0);
  block(seqs, tenc2_, tff2_, enc_norm2_, shift % window_len);

  // back to per-frame layout
  std::vector<Tensor> out;
  for (int t = 0; t < t_len; ++t) {
    std::vector<Tensor> rows;
    for (int64_t i = 0; i < n_f; ++i) rows.push_back(num::slice0(seqs[i], t, t + 1));
    out.push_back(num::concat0(rows));
  }
  return out;
}

Tensor SemanticExtractor::instance_decode(const std::vector<Tensor>& encoded_per_frame,
                                          Tensor* cache_attn, Tensor* cache_values) const {
  Tensor all = num::concat0(encoded_per_frame);  // [T*N_f, C_s]
  Tensor q = video_queries_;
  q = num::add(q, multihead_attention(vdec_norm1_.forward(q), all, vdec1_, 1, true, nullptr,
                                      cache_attn, cache_values));
  q = vff1_.forward(q);
  q = num::add(q, multihead_attention(vdec_norm2_.forward(q), all, vdec2_, 1, true));
  q = vff2_.forward(q);
  return q;
}

std::vector<Tensor> SemanticExtractor::predict_mask_logits(
    const Tensor& video_tokens, const std::vector<Tensor>& features) const {
  std::vector<Tensor> out;
  for (const auto& f : features) {
    if (f.dim(0) != video_tokens.dim(1))
      throw ValidationError("predict_mask_logits: width mismatch");
    Tensor logits = num::matmul(video_tokens, num::reshape(f, {f.dim(0), f.dim(1) * f.dim(2)}));
    out.push_back(num::reshape(logits, {video_tokens.dim(0), f.dim(1), f.dim(2)}));
  }
  return out;
}

std::vector<uint16_t> SemanticExtractor::exclusive_label_map(const Tensor& logits,
                                                             double bg_bias) {
  const int64_t n = logits.dim(0), hw = logits.dim(1) * logits.dim(2);
  std::vector<uint16_t> out(static_cast<size_t>(hw), 0);
  for (int64_t p = 0; p < hw; ++p) {
    double best = bg_bias;
    uint16_t id = 0;
    for (int64_t i = 0; i < n; ++i)
      if (logits.data()[i * hw + p] > best) {
        best = logits.data()[i * hw + p];
        id = static_cast<uint16_t>(i + 1);
      }
    out[static_cast<size_t>(p)] = id;
  }
  return out;
}

Tensor SemanticExtractor::pooled_token(const Tensor& feat_flat,
                                       const std::vector<int64_t>& pixels,
                                       bool normalize) const {
  const int64_t c = feat_flat.dim(1);
  if (pixels.empty()) return Tensor::zeros({c});
  std::vector<double> ind(static_cast<size_t>(feat_flat.dim(0)), 0.0);
  for (int64_t p : pixels) ind[static_cast<size_t>(p)] = 1.0 / static_cast<double>(pixels.size());
  Tensor t = num::reshape(num::matmul(Tensor::from_data({1, feat_flat.dim(0)}, ind), feat_flat),
                          {c});
  return normalize ? l2_normalize(t) : t;
}

SemanticBundle SemanticExtractor::oracle_bundle(const vid::VideoClip& clip) const {
  if (clip.label_maps.empty())
    throw ValidationError("oracle_bundle: clip has no ground-truth label maps");
  SemanticBundle bundle;
  bundle.width = dims_.C_s;
  bundle.h = clip.lr_h;
  bundle.w = clip.lr_w;
  bundle.label_maps = clip.label_maps;

  std::vector<Tensor> flats;
  for (int t = 0; t < clip.frames(); ++t) {
    Tensor f = frame_encode(clip.lr_frames[static_cast<size_t>(t)]);
    FrameDecode dec = frame_decode(f, combined_queries());
    bundle.global_tokens.push_back(
        num::reshape(num::slice0(dec.tokens, dims_.N_f, dims_.N_f + 1), {dims_.C_s}));
    flats.push_back(flatten_pixels(dec.features));
  }
  Tensor all = num::concat0(flats);  // [T*HW, C_s]
  const int64_t hw = clip.lr_h * clip.lr_w;
  std::vector<Tensor> token_rows;
  for (int64_t i = 0; i < dims_.N_v; ++i) {
    std::vector<int64_t> pixels;
    for (int t = 0; t < clip.frames(); ++t)
      for (int64_t p = 0; p < hw; ++p)
        if (clip.label_maps[static_cast<size_t>(t)][static_cast<size_t>(p)] == i + 1)
          pixels.push_back(t * hw + p);
    token_rows.push_back(num::reshape(pooled_token(all, pixels, true), {1, dims_.C_s}));
  }
  bundle.video_tokens = num::concat0(token_rows);
  std::vector<int64_t> bg_pixels;
  for (int t = 0; t < clip.frames(); ++t)
    for (int64_t p = 0; p < hw; ++p)
      if (clip.label_maps[static_cast<size_t>(t)][static_cast<size_t>(p)] == 0)
        bg_pixels.push_back(t * hw + p);
  bundle.background_token = pooled_token(all, bg_pixels, true);
  return bundle;
}

SemanticBundle SemanticExtractor::learned_bundle(const std::vector<Tensor>& lr_frames) const {
  SemanticBundle bundle;
  bundle.width = dims_.C_s;
  bundle.h = lr_frames.at(0).dim(1);
  bundle.w = lr_frames.at(0).dim(2);

  std::vector<Tensor> flats, features, instance_tokens;
  for (const auto& lr : lr_frames) {
    Tensor f = frame_encode(lr);
    FrameDecode dec = frame_decode(f, combined_queries());
    bundle.global_tokens.push_back(
        num::reshape(num::slice0(dec.tokens, dims_.N_f, dims_.N_f + 1), {dims_.C_s}));
    instance_tokens.push_back(num::slice0(dec.tokens, 0, dims_.N_f));
    features.push_back(dec.features);
    flats.push_back(flatten_pixels(dec.features));
  }
  auto encoded = instance_encode(instance_tokens);
  bundle.video_tokens = instance_decode(encoded);
  bundle.mask_logits = predict_mask_logits(bundle.video_tokens, features);
  const double bias = bg_bias_.data()[0];
  for (const auto& logits : bundle.mask_logits)
    bundle.label_maps.push_back(exclusive_label_map(logits, bias));

  const int64_t hw = bundle.h * bundle.w;
  std::vector<int64_t> bg_pixels;
  for (size_t t = 0; t < bundle.label_maps.size(); ++t)
    for (int64_t p = 0; p < hw; ++p)
      if (bundle.label_maps[t][static_cast<size_t>(p)] == 0)
        bg_pixels.push_back(static_cast<int64_t>(t) * hw + p);
  bundle.background_token = pooled_token(num::concat0(flats), bg_pixels, true);
  return bundle;
}

SemanticBundle SemanticExtractor::compress(const SemanticBundle& bundle) const {
  SemanticBundle out;
  out.width = dims_.C;
  out.h = bundle.h;
  out.w = bundle.w;
  out.label_maps = bundle.label_maps;
  out.mask_logits = bundle.mask_logits;
  for (const auto& g : bundle.global_tokens)
    out.global_tokens.push_back(
        num::reshape(compress_.forward(num::reshape(g, {1, dims_.C_s})), {dims_.C}));
  out.video_tokens = compress_.forward(bundle.video_tokens);
  out.background_token = num::reshape(
      compress_.forward(num::reshape(bundle.background_token, {1, dims_.C_s})), {dims_.C});
  return out;
}

Tensor SemanticExtractor::mask_bce_loss(const std::vector<Tensor>& mask_logits,
                                        const std::vector<std::vector<uint16_t>>& gt_labels) const {
  if (mask_logits.size() != gt_labels.size())
    throw ValidationError("mask_bce_loss: frame count mismatch");
  Tensor total = Tensor::zeros({1});
  for (size_t t = 0; t < mask_logits.size(); ++t) {
    const Tensor& l = mask_logits[t];
    const int64_t n = l.dim(0), hw = l.dim(1) * l.dim(2);
    std::vector<double> target(static_cast<size_t>(n * hw), 0.0);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t p = 0; p < hw; ++p)
        if (gt_labels[t][static_cast<size_t>(p)] == i + 1) target[static_cast<size_t>(i * hw + p)] = 1.0;
    Tensor y = Tensor::from_data(l.shape(), std::move(target));
    // stable form: max(l,0) - l*y + log(1+exp(-|l|))
    Tensor pos = num::relu(l);
    Tensor absl = num::add(pos, num::relu(num::neg(l)));
    Tensor log1p = num::log_t(num::add_scalar(num::exp_t(num::neg(absl)), 1.0));
    Tensor term = num::add(num::sub(pos, num::mul(l, y)), log1p);
    total = num::add(total, num::mean(term));
  }
  return num::scale(total, 1.0 / static_cast<double>(mask_logits.size()));
}

double mask_iou(const std::vector<uint16_t>& a, const std::vector<uint16_t>& b, uint16_t id) {
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const bool in_a = a[i] == id, in_b = b[i] == id;
    inter += in_a && in_b;
    uni += in_a || in_b;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace semlens::sem
