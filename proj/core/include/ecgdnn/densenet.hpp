#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ecgdnn/tensor.hpp"

namespace ecgdnn {

struct DenseNetConfig {
  int init_channels = 64;
  int growth_rate = 32;
  std::array<int, 4> block_layers{6, 12, 24, 16};
  int bn_size = 4;          // bottleneck expansion factor
  double compression = 0.5; // transition channel fraction
  int input_leads = 12;
  int input_len = 5000;
  int num_outputs = 1;
  std::string preset = "custom";
  double linear_init_weight = 0.01;  // constant head weight (nonzero to break symmetry)

  static DenseNetConfig paper_default();
  static DenseNetConfig desk_scale();
  void validate() const;  // throws ConfigInvalid
};

/// The 9 ordered freezable units. freeze_prefix(k) freezes units [0, k);
/// k = 7 leaves Dense4 and Head trainable.
enum class BlockUnit : std::uint8_t {
  kStem = 0,
  kDense1 = 1,
  kTrans1 = 2,
  kDense2 = 3,
  kTrans2 = 4,
  kDense3 = 5,
  kTrans3 = 6,
  kDense4 = 7,
  kHead = 8,
};

inline constexpr int kNumBlockUnits = 9;
std::string_view block_unit_name(BlockUnit u);

template <typename T>
struct BnParams {
  Tensor<T> gamma, beta;
  Tensor<T> running_mean, running_var;
};

template <typename T>
struct DenseLayerParams {
  BnParams<T> bn1;
  Tensor<T> conv1_w;  // bottleneck 1x1, bn_size*growth outputs
  BnParams<T> bn2;
  Tensor<T> conv2_w;  // k=3 pad 1, growth outputs
};

template <typename T>
struct DenseBlockParams {
  std::vector<DenseLayerParams<T>> layers;
};

template <typename T>
struct TransitionParams {
  BnParams<T> bn;
  Tensor<T> conv_w;  // 1x1 compressing
};

/// 1-D DenseNet: stem (conv k7 s2 p3, BN, ReLU, maxpool k3 s2 p1), four
/// dense blocks with three compressing transitions between them, and a
/// BN/ReLU/adaptive-avg-pool/linear head emitting one logit.
///
/// Dense layers follow the bottleneck form BN-ReLU-conv1x1-BN-ReLU-conv3,
/// with the layer output concatenated onto its input. Convolutions carry
/// no bias (a BN always follows).
template <typename T>
class DenseNetModel {
 public:
  explicit DenseNetModel(const DenseNetConfig& config);

  const DenseNetConfig& config() const { return config_; }

  /// Kaiming-normal conv weights (std = sqrt(2/fan_in)), BN gamma 1 beta 0,
  /// running stats 0/1, constant head weight and zero bias. Draw order is
  /// fixed, so one seed pins every parameter.
  void init_params(Prng& prng);
  void init_params(std::uint64_t seed);

  /// Re-applies init_params rules to trainable units only; frozen tensors
  /// are untouched and consume no draws.
  void reinit_unfrozen(Prng& prng);
  void reinit_unfrozen(std::uint64_t seed);

  /// x: B x input_leads x input_len -> logits B x num_outputs. Train mode
  /// updates BN running stats of trainable units only; frozen and eval BNs
  /// normalize by their stored running stats.
  Tensor<T> forward(const Tensor<T>& x, BatchNormMode mode, Tape<T>* tape);

  /// Marks units [0, k) non-trainable and the rest trainable. k in [0, 9].
  void freeze_prefix(int k);
  bool unit_trainable(BlockUnit u) const {
    return trainable_[static_cast<std::size_t>(u)];
  }
  std::vector<BlockUnit> trainable_units() const;

  struct NamedTensor {
    std::string name;
    BlockUnit unit;
    Tensor<T>* tensor;
    bool is_param;  // false for BN running stats
  };
  /// Every tensor of the model in a fixed canonical order.
  std::vector<NamedTensor> named_tensors();

  /// Optimizer view: parameter tensors of trainable units.
  std::vector<Tensor<T>*> trainable_params();

  std::size_t total_tensor_count();

  /// Channel counts: after stem, then after each dense block and each
  /// transition, ending with the head input width.
  std::vector<int> channel_trace() const;
  /// Sequence lengths: input, after stem conv, after stem pool, after each
  /// transition pool.
  std::vector<int> length_trace() const;

  /// Seed recorded by the last init/training step; persisted in checkpoints.
  std::uint64_t seed = 0;

 private:
  template <typename Visitor>
  void visit(Visitor&& visitor);  // fixed tensor order

  Tensor<T> dense_layer_forward(const Tensor<T>& x, DenseLayerParams<T>& layer,
                                BatchNormMode mode, Tape<T>* tape);
  BatchNormMode effective_mode(BlockUnit unit, BatchNormMode mode) const;

  DenseNetConfig config_;
  std::array<bool, kNumBlockUnits> trainable_;

  Tensor<T> stem_conv_w_;
  BnParams<T> stem_bn_;
  std::array<DenseBlockParams<T>, 4> blocks_;
  std::array<TransitionParams<T>, 3> transitions_;
  BnParams<T> head_bn_;
  Tensor<T> head_lin_w_, head_lin_b_;
};

using Model = DenseNetModel<float>;

extern template class DenseNetModel<float>;
extern template class DenseNetModel<double>;

}  // namespace ecgdnn
