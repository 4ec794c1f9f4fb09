#include "space/space.hpp"

#include <cmath>

namespace semlens::space {

using num::Tensor;

GpsWeights::GpsWeights(ParamStore& ps, const std::string& name, int64_t c, num::Rng& rng)
    : conv1(ps, name + ".conv1", c, c, rng),
      conv2(ps, name + ".conv2", c, 2 * c, rng, /*zero_init=*/true) {}

IseeWeights::IseeWeights(ParamStore& ps, const std::string& name, int64_t c, num::Rng& rng) {
  wq = ps.uniform_fan_in(name + ".wq", {c, c}, c, rng);
  wk = ps.uniform_fan_in(name + ".wk", {c, c}, c, rng);
  wv = ps.zeros(name + ".wv", {c, c});
}

Tensor gps_extend(const Tensor& token, const Tensor& features) {
  if (token.rank() != 1 || features.rank() != 3 || token.dim(0) != features.dim(0))
    throw ValidationError("gps_extend: token width must match feature channels");
  return num::channel_scale(features, token);
}

Tensor gps_modulate(const Tensor& features, const Tensor& extended, const GpsWeights& w) {
  if (features.shape() != extended.shape())
    throw ValidationError("gps_modulate: shape mismatch");
  const int64_t c = features.dim(0);
  Tensor pair = w.conv2.forward(num::relu(w.conv1.forward(extended)));
  Tensor gamma = num::slice0(pair, 0, c);
  Tensor beta = num::slice0(pair, c, 2 * c);
  return num::add(num::add(num::mul(features, gamma), beta), features);
}

Tensor isee_attend(const Tensor& features, const Tensor& tokens, const IseeWeights& w,
                   int heads, bool scale_logits, Tensor* cache_attn) {
  if (tokens.rank() != 2 || tokens.dim(0) < 1)
    throw ValidationError("isee_attend: need at least one token row");
  const int64_t c = features.dim(0);
  if (tokens.dim(1) != c) throw ValidationError("isee_attend: token width mismatch");
  if (c % heads != 0) throw ValidationError("isee_attend: C not divisible by heads");
  const int64_t d = c / heads;
  Tensor pixels = num::transpose2d(num::reshape(features, {c, features.dim(1) * features.dim(2)}));
  Tensor q = num::matmul(pixels, w.wq);
  Tensor k = num::matmul(tokens, w.wk);
  Tensor v = num::matmul(tokens, w.wv);
  std::vector<Tensor> outs, attns;
  for (int h = 0; h < heads; ++h) {
    Tensor logits = num::matmul(num::slice_cols(q, h * d, (h + 1) * d),
                                num::transpose2d(num::slice_cols(k, h * d, (h + 1) * d)));
    if (scale_logits) logits = num::scale(logits, 1.0 / std::sqrt(static_cast<double>(d)));
    Tensor a = num::softmax_lastdim(logits);
    if (cache_attn) attns.push_back(a);
    outs.push_back(num::matmul(a, num::slice_cols(v, h * d, (h + 1) * d)));
  }
  if (cache_attn) *cache_attn = heads == 1 ? attns[0] : num::concat0(attns);
  Tensor av = heads == 1 ? outs[0] : num::concat_cols(outs);
  return num::add(num::reshape(num::transpose2d(av), features.shape()), features);
}

SpaceBlock::SpaceBlock(ParamStore& ps, const std::string& name, const ModelDims& dims,
                       num::Rng& rng)
    : dims_(dims) {
  // disabled stages register no parameters at all (ablation variants carry
  // strictly smaller parameter sets)
  if (dims.enable_gps) gps_ = GpsWeights(ps, name + ".gps", dims.C, rng);
  if (dims.enable_isee) isee_ = IseeWeights(ps, name + ".isee", dims.C, rng);
}

SpaceOutput SpaceBlock::forward(const Tensor& features, const sem::SemanticBundle& bundle,
                                int t) const {
  if (bundle.width != dims_.C)
    throw ValidationError("space_forward: bundle must be compressed to width C");
  SpaceOutput out;
  out.modulated = features;
  if (dims_.enable_gps) {
    const Tensor& g = bundle.global_tokens.at(static_cast<size_t>(t));
    out.modulated = gps_modulate(features, gps_extend(g, features), gps_);
  }
  out.output = out.modulated;
  if (dims_.enable_isee) {
    Tensor tokens = num::concat0(
        {bundle.video_tokens, num::reshape(bundle.background_token, {1, dims_.C})});
    out.output = isee_attend(out.modulated, tokens, isee_, 1, dims_.isee_scaling, &out.attn);
  }
  return out;
}

}  // namespace semlens::space
