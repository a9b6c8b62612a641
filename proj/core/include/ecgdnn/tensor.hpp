#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "ecgdnn/errors.hpp"
#include "ecgdnn/prng.hpp"

namespace ecgdnn {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape);

/// Node storage behind a Tensor handle. Gradients are allocated lazily and
/// accumulate additively.
template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  bool is_leaf = true;  // not produced by a recorded op

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

/// Shared handle to an n-dimensional row-major array that can take part in
/// reverse-mode differentiation. Copying the handle aliases the storage.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    Tensor t;
    t.node_ = std::make_shared<TensorNode<T>>();
    t.node_->shape = std::move(shape);
    t.node_->value.assign(static_cast<std::size_t>(shape_numel(t.node_->shape)), T(0));
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from_values(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
      throw ShapeMismatch("value count does not match shape " + shape_to_string(shape));
    }
    Tensor t;
    t.node_ = std::make_shared<TensorNode<T>>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(values);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return from_values({1}, {v}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }
  std::int64_t dim(std::size_t i) const { return node_->shape[i]; }

  T* data() { return node_->value.data(); }
  const T* data() const { return node_->value.data(); }
  std::vector<T>& values() { return node_->value; }
  const std::vector<T>& values() const { return node_->value; }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  bool has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }
  T* grad_data() {
    node_->ensure_grad();
    return node_->grad.data();
  }
  const std::vector<T>& grad() const { return node_->grad; }
  void zero_grad() {
    if (node_) node_->grad.assign(node_->value.size(), T(0));
  }

  /// A deep copy with its own storage. Gradient state is not copied.
  Tensor clone() const {
    Tensor t = from_values(node_->shape, node_->value, node_->requires_grad);
    t.node_->is_leaf = node_->is_leaf;
    return t;
  }

  std::shared_ptr<TensorNode<T>> node() const { return node_; }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

/// Define-by-run gradient tape. Forward ops append a backward closure per
/// recorded operation; backward() replays them in exact reverse order.
template <typename T>
class Tape {
 public:
  void record(const Tensor<T>& output, std::function<void()> backward_fn) {
    output.node()->is_leaf = false;
    entries_.push_back({output.node(), std::move(backward_fn)});
  }

  std::size_t size() const { return entries_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
  /// requires_grad leaf. Intermediate gradients are reset per call, leaf
  /// gradients accumulate across calls.
  void backward(const Tensor<T>& loss);

 private:
  struct Entry {
    std::shared_ptr<TensorNode<T>> output;
    std::function<void()> fn;
  };
  std::vector<Entry> entries_;
};

enum class BatchNormMode { kTrain, kEval };

/// 1-D cross-correlation. x: B x Cin x L, w: Cout x Cin x k, bias: Cout or
/// undefined. Output B x Cout x L' with L' = floor((L + 2 pad - k)/stride)+1.
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, int stride,
                 int pad, Tape<T>* tape);

/// Per-channel batch normalization over (B, L). In train mode the batch
/// statistics normalize and the running stats are updated in place
/// (population variance normalizes, the unbiased variance feeds the running
/// estimate, matching the reference formulation). In eval mode the running
/// stats normalize. gamma/beta: C. Throws DegenerateBatch when B*L < 2 in
/// train mode.
template <typename T>
Tensor<T> batchnorm1d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                      Tensor<T>& running_mean, Tensor<T>& running_var, BatchNormMode mode,
                      double momentum, double eps, Tape<T>* tape);

template <typename T>
Tensor<T> relu(const Tensor<T>& x, Tape<T>* tape);  // d/dx at 0 is 0

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x, Tape<T>* tape);

/// Max pooling; ties take the lowest index. Padding is -inf-like (padded
/// positions never win).
template <typename T>
Tensor<T> maxpool1d(const Tensor<T>& x, int kernel, int stride, int pad, Tape<T>* tape);

template <typename T>
Tensor<T> avgpool1d(const Tensor<T>& x, int kernel, int stride, Tape<T>* tape);

/// Mean over the whole length axis: B x C x L -> B x C x 1.
template <typename T>
Tensor<T> adaptive_avg_pool1d(const Tensor<T>& x, Tape<T>* tape);

/// Channel-axis concatenation of B x Ci x L inputs.
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs, Tape<T>* tape);

/// x: B x F, w: O x F, bias: O. Output B x O.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 Tape<T>* tape);

/// Same data, new shape (copy).
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape, Tape<T>* tape);

/// Mean over the batch of
///   pos_weight * y * softplus(-z) + (1 - y) * softplus(z)
/// in log-sum-exp form. z: B x 1 logits, y: B x 1 in {0,1}. Scalar output.
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& z, const Tensor<T>& y, double pos_weight,
                          Tape<T>* tape);

/// Fills a tensor with normal deviates (used by initializers).
template <typename T>
void fill_normal(Tensor<T>& t, Prng& prng, double mean, double stddev);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace ecgdnn
