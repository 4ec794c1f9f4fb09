#ifndef SEMLENS_SPACE_SPACE_HPP
#define SEMLENS_SPACE_SPACE_HPP

#include <string>

#include "model/dims.hpp"
#include "model/params.hpp"
#include "semantics/extractor.hpp"

namespace semlens::space {

// Conditioning convs for the global-semantics modulation; conv2 produces the
// (gamma, beta) pair stacked along channels and starts at zero so the whole
// modulation begins as the identity.
struct GpsWeights {
  Conv3x3 conv1;  // C -> C
  Conv3x3 conv2;  // C -> 2C, zero-init
  GpsWeights() = default;
  GpsWeights(ParamStore& ps, const std::string& name, int64_t c, num::Rng& rng);
};

// Pure projection matrices [C,D] with D = C; no biases. wv starts at zero so
// the residual attention output equals its input.
struct IseeWeights {
  num::Tensor wq, wk, wv;
  IseeWeights() = default;
  IseeWeights(ParamStore& ps, const std::string& name, int64_t c, num::Rng& rng);
};

struct SpaceOutput {
  num::Tensor modulated;  // F-tilde, [C,H,W]
  num::Tensor output;     // semantic-aware features, [C,H,W]
  num::Tensor attn;       // [HW, N_tokens] rows summing to 1; undefined if skipped
};

// Channelwise broadcast of a width-C token over the feature map.
num::Tensor gps_extend(const num::Tensor& token, const num::Tensor& features);

// (F * gamma + beta) + F with (gamma, beta) generated from the extended token.
num::Tensor gps_modulate(const num::Tensor& features, const num::Tensor& extended,
                         const GpsWeights& w);

// Pixel-query cross-attention over token rows; output = AV + features.
num::Tensor isee_attend(const num::Tensor& features, const num::Tensor& tokens,
                        const IseeWeights& w, int heads, bool scale_logits,
                        num::Tensor* cache_attn = nullptr);

class SpaceBlock {
 public:
  SpaceBlock(ParamStore& ps, const std::string& name, const ModelDims& dims, num::Rng& rng);

  // Applies GPS then ISEE for frame t of the compressed bundle. Disabled
  // stages pass features through untouched.
  SpaceOutput forward(const num::Tensor& features, const sem::SemanticBundle& bundle,
                      int t) const;

 private:
  ModelDims dims_;
  GpsWeights gps_;
  IseeWeights isee_;
};

}  // namespace semlens::space

#endif
