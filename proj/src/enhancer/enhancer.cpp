#include "enhancer/enhancer.hpp"

#include <cmath>

#include "synthvid/resample.hpp"

namespace semlens::enh {

using num::Tensor;

namespace {

int64_t reflect(int64_t i, int64_t n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

int64_t round_up(int64_t v, int64_t m) { return (v + m - 1) / m * m; }

}  // namespace

std::vector<Tensor> window_partition(const std::vector<Tensor>& frames, int win, int sy,
                                     int sx) {
  if (frames.empty()) throw ValidationError("window_partition: no frames");
  const int64_t t_frames = static_cast<int64_t>(frames.size());
  const int64_t c = frames[0].dim(0), h = frames[0].dim(1), w = frames[0].dim(2);
  const int64_t hp = round_up(h + sy, win), wp = round_up(w + sx, win);
  const int64_t nwy = hp / win, nwx = wp / win;
  Tensor all = num::concat0(frames);  // [T*C, H, W]

  std::vector<Tensor> windows;
  for (int64_t wy = 0; wy < nwy; ++wy) {
    for (int64_t wx = 0; wx < nwx; ++wx) {
      std::vector<int64_t> idx(static_cast<size_t>(t_frames * win * win * c));
      size_t i = 0;
      for (int64_t t = 0; t < t_frames; ++t) {
        for (int64_t iy = 0; iy < win; ++iy) {
          for (int64_t ix = 0; ix < win; ++ix) {
            const int64_t y = reflect(wy * win + iy - sy, h);
            const int64_t x = reflect(wx * win + ix - sx, w);
            for (int64_t ch = 0; ch < c; ++ch)
              idx[i++] = ((t * c + ch) * h + y) * w + x;
          }
        }
      }
      windows.push_back(num::gather(all, idx, {t_frames * win * win, c}));
    }
  }
  return windows;
}

std::vector<Tensor> window_reverse(const std::vector<Tensor>& windows, int win, int sy, int sx,
                                   int t_frames, int64_t c, int64_t h, int64_t w) {
  const int64_t wp = round_up(w + sx, win);
  const int64_t nwx = wp / win;
  Tensor all = num::concat0(windows);  // [Nw * T*win*win, C]
  const int64_t tokens_per_window = static_cast<int64_t>(t_frames) * win * win;
  std::vector<Tensor> frames;
  for (int64_t t = 0; t < t_frames; ++t) {
    std::vector<int64_t> idx(static_cast<size_t>(c * h * w));
    size_t i = 0;
    for (int64_t ch = 0; ch < c; ++ch) {
      for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
          const int64_t py = y + sy, px = x + sx;
          const int64_t widx = (py / win) * nwx + (px / win);
          const int64_t token = t * win * win + (py % win) * win + (px % win);
          idx[i++] = (widx * tokens_per_window + token) * c + ch;
        }
      }
    }
    frames.push_back(num::gather(all, idx, {c, h, w}));
  }
  return frames;
}

MfsabBlock::MfsabBlock(ParamStore& ps, const std::string& name, const ModelDims& dims,
                       bool shifted_, num::Rng& rng)
    : norm(ps, name + ".norm", dims.C),
      attn(ps, name + ".attn", dims.C, rng),
      ff(ps, name + ".ff", dims.C, 2, rng),
      win(dims.win),
      heads(dims.heads),
      shifted(shifted_) {}

std::vector<Tensor> MfsabBlock::forward(const std::vector<Tensor>& frames,
                                        std::vector<Tensor>* cache_attn) const {
  const int s = shifted ? win / 2 : 0;
  const int64_t c = frames[0].dim(0), h = frames[0].dim(1), w = frames[0].dim(2);
  auto windows = window_partition(frames, win, s, s);
  for (auto& x : windows) {
    Tensor ln = norm.forward(x);
    Tensor a;
    x = num::add(x, multihead_attention(ln, ln, attn, heads, true, nullptr,
                                        cache_attn ? &a : nullptr));
    if (cache_attn) cache_attn->push_back(a);
    x = ff.forward(x);
  }
  return window_reverse(windows, win, s, s, static_cast<int>(frames.size()), c, h, w);
}

Enhancer::Enhancer(ParamStore& ps, const ModelDims& dims, num::Rng& rng)
    : dims_(dims),
      stem1_(ps, "enh.stem1", 3, dims.C, rng),
      stem2_(ps, "enh.stem2", dims.C, dims.C, rng),
      rec1_(ps, "enh.rec1", dims.C, 4 * dims.C, rng),
      rec2_(ps, "enh.rec2", dims.C, 4 * dims.C, rng),
      rec3_(ps, "enh.rec3", dims.C, 3, rng, /*zero_init=*/true) {
  for (int k = 0; k < 4; ++k) {
    Branch br;
    br.backward = k % 2 == 0;
    const std::string base = "enh.br" + std::to_string(k);
    if (dims.enable_image) br.align = align::AlignWeights(ps, base + ".align", dims.C, rng);
    br.fuse = Conv1x1(ps, base + ".fuse", 3 * dims.C, dims.C, rng, false, /*identity=*/true);
    const int n_space = dims.space_every_block ? dims.blocks : 1;
    for (int b = 0; b < n_space; ++b)
      br.spaces.emplace_back(ps, base + ".space" + std::to_string(b), dims, rng);
    for (int b = 0; b < dims.blocks; ++b)
      br.blocks.emplace_back(ps, base + ".blk" + std::to_string(b), dims, b % 2 == 1, rng);
    branches_.push_back(std::move(br));
  }
}

Tensor Enhancer::stem(const Tensor& lr_frame) const {
  return stem2_.forward(num::relu(stem1_.forward(lr_frame)));
}

std::vector<Tensor> Enhancer::propagate(const std::vector<Tensor>& lr_frames,
                                        const sem::SemanticBundle& bundle) const {
  const int t_len = static_cast<int>(lr_frames.size());
  if (t_len < 1) throw ValidationError("propagate: need at least one frame");
  if (static_cast<int>(bundle.label_maps.size()) != t_len ||
      static_cast<int>(bundle.global_tokens.size()) != t_len)
    throw ValidationError("propagate: bundle frame count mismatch");

  std::vector<Tensor> cur;
  for (const auto& lr : lr_frames) cur.push_back(stem(lr));
  const int64_t c = cur[0].dim(0), h = cur[0].dim(1), w = cur[0].dim(2);
  const align::WindowSpec wspec{.radius = dims_.radius, .heads = 1};

  for (const Branch& br : branches_) {
    std::vector<int> order(static_cast<size_t>(t_len));
    for (int i = 0; i < t_len; ++i)
      order[static_cast<size_t>(i)] = br.backward ? t_len - 1 - i : i;

    // second-order recurrence over the fused features
    std::vector<Tensor> fused(static_cast<size_t>(t_len));
    for (int i = 0; i < t_len; ++i) {
      const int t = order[static_cast<size_t>(i)];
      Tensor a1 = Tensor::zeros({c, h, w}), a2 = Tensor::zeros({c, h, w});
      auto aligned_pred = [&](int steps_back) {
        const int p = order[static_cast<size_t>(i - steps_back)];
        if (!dims_.enable_image) return fused[static_cast<size_t>(p)];
        Tensor mask = align::build_attention_mask(
            bundle.label_maps[static_cast<size_t>(t)], bundle.label_maps[static_cast<size_t>(p)],
            h, w, wspec);
        return align::masked_local_attention(cur[static_cast<size_t>(t)],
                                             fused[static_cast<size_t>(p)], mask, wspec,
                                             br.align);
      };
      if (i >= 1) a1 = aligned_pred(1);
      if (i >= 2) a2 = aligned_pred(2);
      fused[static_cast<size_t>(t)] =
          br.fuse.forward(num::concat0({cur[static_cast<size_t>(t)], a1, a2}));
    }

    std::vector<Tensor> feats = fused;
    for (size_t b = 0; b < br.blocks.size(); ++b) {
      if (b < br.spaces.size()) {
        for (int t = 0; t < t_len; ++t)
          feats[static_cast<size_t>(t)] =
              br.spaces[b].forward(feats[static_cast<size_t>(t)], bundle, t).output;
      }
      feats = br.blocks[b].forward(feats);
    }
    cur = feats;
  }
  return cur;
}

Tensor Enhancer::reconstruct(const Tensor& features, const Tensor& lr_ref) const {
  if (dims_.scale != 4) throw ValidationError("reconstruct: only x4 upsampling is supported");
  Tensor x = num::pixel_shuffle(num::relu(rec1_.forward(features)), 2);
  x = num::pixel_shuffle(num::relu(rec2_.forward(x)), 2);
  Tensor head = rec3_.forward(x);
  Tensor bicubic =
      vid::bicubic_resize_diff(lr_ref, lr_ref.dim(1) * dims_.scale, lr_ref.dim(2) * dims_.scale);
  return num::add(head, bicubic);
}

Tensor Enhancer::forward_full(const std::vector<Tensor>& lr_frames,
                              const sem::SemanticBundle& bundle, int t_ref) const {
  if (t_ref < 0 || t_ref >= static_cast<int>(lr_frames.size()))
    throw ValidationError("forward_full: reference index out of range");
  std::vector<Tensor> feats = propagate(lr_frames, bundle);
  return reconstruct(feats[static_cast<size_t>(t_ref)], lr_frames[static_cast<size_t>(t_ref)]);
}

}  // namespace semlens::enh
