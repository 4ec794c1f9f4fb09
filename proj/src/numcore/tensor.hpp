#ifndef SEMLENS_NUMCORE_TENSOR_HPP
#define SEMLENS_NUMCORE_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace semlens {

// Thrown for bad shapes, bad config values, malformed files. Maps to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown for runtime failures (NaN loss, degenerate softmax rows, I/O). Exit code 1.
class RuntimeFailure : public std::runtime_error {
 public:
  explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

namespace num {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily by backward()
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backprop;  // adds into parents' grad buffers
  bool requires_grad = false;      // true for leaves that want gradients
  bool allows_inf = false;         // set only on additive-mask values pre-softmax

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  bool is_leaf() const { return parents.empty(); }
  void ensure_grad();
};

// Value-semantic handle to a node of the implicit tape. Copies share storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& s);
  static Tensor full(const Shape& s, double v);
  static Tensor from_data(const Shape& s, std::vector<double> d);
  // Leaf with requires_grad set; the unit every optimizer step touches.
  static Tensor param(const Shape& s, std::vector<double> d);

  const Shape& shape() const { return n_->shape; }
  int64_t numel() const { return n_->numel(); }
  int64_t dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(n_->shape.size()); }

  const std::vector<double>& data() const { return n_->data; }
  std::vector<double>& mutable_data() { return n_->data; }
  double item() const;

  bool defined() const { return n_ != nullptr; }
  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool v) { n_->requires_grad = v; }
  bool allows_inf() const { return n_->allows_inf; }

  std::vector<double>& grad() {
    n_->ensure_grad();
    return n_->grad;
  }
  bool has_grad() const { return !n_->grad.empty(); }
  void zero_grad();

  std::shared_ptr<Node> node() const { return n_; }
  static Tensor wrap(std::shared_ptr<Node> n) {
    Tensor t;
    t.n_ = std::move(n);
    return t;
  }

 private:
  std::shared_ptr<Node> n_;
};

// Deterministic xorshift64* generator; identical seed gives an identical
// sequence on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed);
  uint64_t next_u64();
  double uniform();                       // [0,1)
  double uniform(double lo, double hi);
  double normal();                        // Box-Muller, cached pair
  int64_t uniform_int(int64_t lo, int64_t hi);  // inclusive bounds
  uint64_t state() const { return state_; }
  void set_state(uint64_t s, bool has_cache, double cache);
  bool has_cached_normal() const { return has_cache_; }
  double cached_normal() const { return cache_; }

 private:
  uint64_t state_;
  bool has_cache_ = false;
  double cache_ = 0.0;
};

// ----- primitive ops (all differentiable, all NaN-checked) -----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& a);
Tensor add_rowvec(const Tensor& x, const Tensor& v);  // x[m,n] + v[n] per row

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor sqrt_t(const Tensor& a);

// Max-subtracted softmax over the last axis. Entries at -inf come out exactly
// 0; a slice that is entirely -inf raises RuntimeFailure.
Tensor softmax_lastdim(const Tensor& x);

// Last-axis layer norm, eps fixed at 1e-5.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

// 3x3, stride 1, zero pad 1 cross-correlation.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b);
// 1x1 convolution expressed over flattened pixels. w is [Cout,Cin], b [Cout].
Tensor conv1x1(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor pixel_shuffle(const Tensor& x, int r);
Tensor pixel_unshuffle(const Tensor& x, int r);

// out[i] = idx[i] < 0 ? 0 : x.flat[idx[i]]; backward scatter-adds.
Tensor gather(const Tensor& x, const std::vector<int64_t>& idx, const Shape& out_shape);

Tensor reshape(const Tensor& x, const Shape& s);
Tensor concat0(const std::vector<Tensor>& parts);       // along axis 0
Tensor slice0(const Tensor& x, int64_t from, int64_t to);
Tensor slice_cols(const Tensor& x, int64_t from, int64_t to);  // x[m,n]
Tensor concat_cols(const std::vector<Tensor>& parts);

Tensor sum(const Tensor& x);   // -> scalar [1]
Tensor mean(const Tensor& x);  // -> scalar [1]
Tensor reduce_sum0(const Tensor& x);               // [C,...] -> [...]
Tensor expand0(const Tensor& x, int64_t copies);   // [...] -> [copies,...]
Tensor channel_scale(const Tensor& x, const Tensor& v);  // x[C,H,W] * v[C]
Tensor channel_bias(const Tensor& x, const Tensor& v);   // x[C,...] + v[C]

// Spatial translate with zero fill: out(c,y,x) = in(c, y-dy, x-dx).
Tensor shift2d(const Tensor& x, int dy, int dx);

// Additive 0/-inf mask constant; the one sanctioned producer of non-finite
// values on the tape.
Tensor inf_mask_const(const Shape& s, const std::vector<double>& vals);

// Reverse pass from a scalar loss. Interior grads are reset per call; leaf
// grads accumulate until zero_grad.
void backward(const Tensor& loss);

// Central-difference gradient check of a scalar-valued function of x.
// Returns the worst relative error over all coordinates of x.
double finite_diff_check(const std::function<double(const std::vector<double>&)>& f,
                         Tensor& x, const std::vector<double>& analytic_grad,
                         double h = 1e-5);

}  // namespace num
}  // namespace semlens

#endif
