#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

// Reverse-mode autodiff over float32 tensors.  Graphs are built eagerly by
// the ops below; backward() walks the tape in reverse creation order.  All
// kernels are single-threaded and reduce left-to-right, so every forward and
// backward pass is bitwise reproducible for identical inputs.
namespace evotf::ad {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct Node {
  std::uint64_t seq{0};
  bool leaf{false};
  std::int64_t numel{0};
  std::vector<std::shared_ptr<Node>> parents;
  std::vector<float> grad;  // lazily sized; empty means all-zero
  // Reads the node's own grad (passed in), accumulates into parents' grad.
  std::function<void(const std::vector<float>&)> backprop;

  std::vector<float>& grad_buf() {
    if (grad.empty()) grad.assign(static_cast<std::size_t>(numel), 0.0f);
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape s);
  static Tensor full(Shape s, float v);
  // Constant: participates in ops but receives no gradient.
  static Tensor from(Shape s, std::vector<float> vals);
  // Trainable leaf: gradient is accumulated here by backward().
  static Tensor param(Shape s, std::vector<float> vals);

  const Shape& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t numel() const { return shape_numel(shape_); }
  bool defined() const { return data_ != nullptr; }
  bool tracked() const { return node_ != nullptr; }

  std::vector<float>& values() { return *data_; }
  const std::vector<float>& values() const { return *data_; }
  float scalar() const;

  // Gradient w.r.t. this tensor after backward(); zeros if it never
  // participated in the loss.
  const std::vector<float>& grad() const;
  std::vector<float>& grad_mut();
  void zero_grad();

  Tensor detached() const;

  std::shared_ptr<std::vector<float>> data_;
  Shape shape_;
  std::shared_ptr<Node> node_;
};

// Global gradient-mode switch (thread-local).  Ops executed while a
// NoGradGuard is alive build no graph.
bool grad_enabled();
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  bool prev;
};

// Runs reverse accumulation from a scalar loss.  Grad buffers of every node
// reachable from the loss are reset first; leaves keep their accumulated
// gradient afterwards.
void backward(const Tensor& loss);

// ---- ops ----------------------------------------------------------------

// lhs [..., k] x rhs [k, n] -> [..., n]; leading dims of lhs are flattened.
Tensor matmul(const Tensor& a, const Tensor& b);
// Batched: [L..., m, k] x [L..., k, n] -> [L..., m, n], identical leading dims.
Tensor bmm(const Tensor& a, const Tensor& b);
Tensor transpose_last2(const Tensor& x);
Tensor permute(const Tensor& x, const std::vector<int>& axes);
Tensor reshape(const Tensor& x, Shape s);  // view; shares storage

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
// X [..., S] + B [S] for any trailing shape S of X.
Tensor add_suffix(const Tensor& x, const Tensor& b);
Tensor scale(const Tensor& x, float c);
Tensor add_scalar(const Tensor& x, float c);
Tensor neg(const Tensor& x);

Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
Tensor gelu(const Tensor& x);  // exact erf form

// Softmax over the last axis.  `mask` (optional) holds 1 for kept entries and
// 0 for dropped ones; its shape must be a suffix of x's.  Dropped entries are
// exactly zero in the output and excluded from the row max and normalizer; a
// row with nothing kept is an error.
Tensor softmax_lastdim(const Tensor& x, const Tensor* mask = nullptr);

// LayerNorm over the last axis with affine params gamma, beta (shape [d]).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps = 1e-5f);

Tensor slice_lastdim(const Tensor& x, int start, int len);
Tensor concat_lastdim(const std::vector<Tensor>& xs);
// Insert a new axis of extent `times` at `axis`, tiling x along it.
Tensor expand_at(const Tensor& x, int axis, int times);

// Scalar sum of all entries, accumulated in double.
Tensor sum_all(const Tensor& x);

}  // namespace evotf::ad
