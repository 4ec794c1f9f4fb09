#ifndef SEMLENS_MODEL_PARAMS_HPP
#define SEMLENS_MODEL_PARAMS_HPP

#include <map>
#include <string>
#include <vector>

#include "numcore/tensor.hpp"

namespace semlens {

// Named parameter registry. Creation order is irrelevant; the map is sorted
// by name so serialization and optimizer traversal are deterministic.
class ParamStore {
 public:
  num::Tensor add(const std::string& name, const num::Shape& shape,
                  std::vector<double> init);
  num::Tensor zeros(const std::string& name, const num::Shape& shape);
  // Kaiming-style uniform fan-in init.
  num::Tensor uniform_fan_in(const std::string& name, const num::Shape& shape,
                             int64_t fan_in, num::Rng& rng);
  num::Tensor identity2d(const std::string& name, int64_t n);

  num::Tensor get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }
  const std::map<std::string, num::Tensor>& all() const { return params_; }
  std::map<std::string, num::Tensor>& all() { return params_; }

  int64_t total_count() const;
  void zero_grads();

 private:
  std::map<std::string, num::Tensor> params_;
};

// One dense layer y = x W^T + b with W [out,in].
struct Linear {
  num::Tensor w, b;
  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, int64_t in, int64_t out, num::Rng& rng,
         bool zero_init = false);
  num::Tensor forward(const num::Tensor& x) const;  // x [m,in] -> [m,out]
};

// 3x3 conv layer wrapper.
struct Conv3x3 {
  num::Tensor w, b;
  Conv3x3() = default;
  Conv3x3(ParamStore& ps, const std::string& name, int64_t in, int64_t out, num::Rng& rng,
          bool zero_init = false);
  num::Tensor forward(const num::Tensor& x) const;
};

struct Conv1x1 {
  num::Tensor w, b;
  Conv1x1() = default;
  Conv1x1(ParamStore& ps, const std::string& name, int64_t in, int64_t out, num::Rng& rng,
          bool zero_init = false, bool identity_init = false);
  num::Tensor forward(const num::Tensor& x) const;
};

struct LayerNorm {
  num::Tensor gain, bias;
  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& name, int64_t c);
  num::Tensor forward(const num::Tensor& x) const;
};

}  // namespace semlens

#endif
