#include "ecgdnn/densenet.hpp"

#include <cmath>

#include "ecgdnn/errors.hpp"

namespace ecgdnn {

DenseNetConfig DenseNetConfig::paper_default() {
  DenseNetConfig cfg;
  cfg.init_channels = 64;
  cfg.growth_rate = 32;
  cfg.block_layers = {6, 12, 24, 16};
  cfg.bn_size = 4;
  cfg.compression = 0.5;
  cfg.preset = "paper_default";
  return cfg;
}

DenseNetConfig DenseNetConfig::desk_scale() {
  DenseNetConfig cfg;
  cfg.init_channels = 16;
  cfg.growth_rate = 8;
  cfg.block_layers = {2, 2, 2, 2};
  cfg.bn_size = 4;
  cfg.compression = 0.5;
  cfg.preset = "desk_scale";
  return cfg;
}

void DenseNetConfig::validate() const {
  if (init_channels < 1) throw ConfigInvalid("init_channels must be >= 1");
  if (growth_rate < 1) throw ConfigInvalid("growth_rate must be >= 1");
  for (int n : block_layers) {
    if (n < 1) throw ConfigInvalid("block_layers entries must be >= 1");
  }
  if (bn_size < 1) throw ConfigInvalid("bn_size must be >= 1");
  if (!(compression > 0.0 && compression <= 1.0)) {
    throw ConfigInvalid("compression must be in (0, 1]");
  }
  if (input_leads < 1 || input_len < 1) throw ConfigInvalid("input shape must be positive");
  if (num_outputs < 1) throw ConfigInvalid("num_outputs must be >= 1");
}

std::string_view block_unit_name(BlockUnit u) {
  switch (u) {
    case BlockUnit::kStem: return "stem";
    case BlockUnit::kDense1: return "dense1";
    case BlockUnit::kTrans1: return "trans1";
    case BlockUnit::kDense2: return "dense2";
    case BlockUnit::kTrans2: return "trans2";
    case BlockUnit::kDense3: return "dense3";
    case BlockUnit::kTrans3: return "trans3";
    case BlockUnit::kDense4: return "dense4";
    case BlockUnit::kHead: return "head";
  }
  return "?";
}

namespace {

template <typename T>
BnParams<T> make_bn(int channels) {
  BnParams<T> bn;
  bn.gamma = Tensor<T>::zeros({channels});
  bn.beta = Tensor<T>::zeros({channels});
  bn.running_mean = Tensor<T>::zeros({channels});
  bn.running_var = Tensor<T>::zeros({channels});
  return bn;
}

}  // namespace

template <typename T>
DenseNetModel<T>::DenseNetModel(const DenseNetConfig& config) : config_(config) {
  config_.validate();
  trainable_.fill(true);

  int channels = config_.init_channels;
  stem_conv_w_ = Tensor<T>::zeros({channels, config_.input_leads, 7});
  stem_bn_ = make_bn<T>(channels);

  for (int block = 0; block < 4; ++block) {
    auto& params = blocks_[static_cast<std::size_t>(block)];
    for (int layer = 0; layer < config_.block_layers[static_cast<std::size_t>(block)];
         ++layer) {
      DenseLayerParams<T> lp;
      const int bottleneck = config_.bn_size * config_.growth_rate;
      lp.bn1 = make_bn<T>(channels);
      lp.conv1_w = Tensor<T>::zeros({bottleneck, channels, 1});
      lp.bn2 = make_bn<T>(bottleneck);
      lp.conv2_w = Tensor<T>::zeros({config_.growth_rate, bottleneck, 3});
      params.layers.push_back(std::move(lp));
      channels += config_.growth_rate;
    }
    if (block < 3) {
      auto& trans = transitions_[static_cast<std::size_t>(block)];
      const int compressed = static_cast<int>(std::floor(channels * config_.compression));
      trans.bn = make_bn<T>(channels);
      trans.conv_w = Tensor<T>::zeros({compressed, channels, 1});
      channels = compressed;
    }
  }

  head_bn_ = make_bn<T>(channels);
  head_lin_w_ = Tensor<T>::zeros({config_.num_outputs, channels});
  head_lin_b_ = Tensor<T>::zeros({config_.num_outputs});
  freeze_prefix(0);
}

template <typename T>
template <typename Visitor>
void DenseNetModel<T>::visit(Visitor&& visitor) {
  const auto bn = [&](const std::string& prefix, BlockUnit unit, BnParams<T>& params) {
    visitor(prefix + ".gamma", unit, params.gamma, true);
    visitor(prefix + ".beta", unit, params.beta, true);
    visitor(prefix + ".running_mean", unit, params.running_mean, false);
    visitor(prefix + ".running_var", unit, params.running_var, false);
  };

  visitor("stem.conv.w", BlockUnit::kStem, stem_conv_w_, true);
  bn("stem.bn", BlockUnit::kStem, stem_bn_);
  static constexpr BlockUnit kDenseUnits[4] = {BlockUnit::kDense1, BlockUnit::kDense2,
                                               BlockUnit::kDense3, BlockUnit::kDense4};
  static constexpr BlockUnit kTransUnits[3] = {BlockUnit::kTrans1, BlockUnit::kTrans2,
                                               BlockUnit::kTrans3};
  for (int block = 0; block < 4; ++block) {
    const BlockUnit unit = kDenseUnits[block];
    auto& layers = blocks_[static_cast<std::size_t>(block)].layers;
    for (std::size_t layer = 0; layer < layers.size(); ++layer) {
      const std::string prefix =
          "dense" + std::to_string(block + 1) + ".layer" + std::to_string(layer);
      bn(prefix + ".bn1", unit, layers[layer].bn1);
      visitor(prefix + ".conv1.w", unit, layers[layer].conv1_w, true);
      bn(prefix + ".bn2", unit, layers[layer].bn2);
      visitor(prefix + ".conv2.w", unit, layers[layer].conv2_w, true);
    }
    if (block < 3) {
      const std::string prefix = "trans" + std::to_string(block + 1);
      bn(prefix + ".bn", kTransUnits[block], transitions_[static_cast<std::size_t>(block)].bn);
      visitor(prefix + ".conv.w", kTransUnits[block],
              transitions_[static_cast<std::size_t>(block)].conv_w, true);
    }
  }
  bn("head.bn", BlockUnit::kHead, head_bn_);
  visitor("head.lin.w", BlockUnit::kHead, head_lin_w_, true);
  visitor("head.lin.b", BlockUnit::kHead, head_lin_b_, true);
}

template <typename T>
void DenseNetModel<T>::init_params(Prng& prng) {
  visit([&](const std::string& name, BlockUnit, Tensor<T>& t, bool) {
    if (name.ends_with("conv.w") || name.ends_with("conv1.w") || name.ends_with("conv2.w")) {
      const double fan_in = static_cast<double>(t.dim(1) * t.dim(2));
      fill_normal(t, prng, 0.0, std::sqrt(2.0 / fan_in));
    } else if (name.ends_with(".gamma") || name.ends_with("running_var")) {
      std::fill(t.values().begin(), t.values().end(), T(1));
    } else if (name.ends_with("head.lin.w")) {
      std::fill(t.values().begin(), t.values().end(),
                static_cast<T>(config_.linear_init_weight));
    } else {
      std::fill(t.values().begin(), t.values().end(), T(0));
    }
  });
}

template <typename T>
void DenseNetModel<T>::init_params(std::uint64_t new_seed) {
  seed = new_seed;
  Prng prng(new_seed);
  init_params(prng);
}

template <typename T>
void DenseNetModel<T>::reinit_unfrozen(Prng& prng) {
  visit([&](const std::string& name, BlockUnit unit, Tensor<T>& t, bool) {
    if (!trainable_[static_cast<std::size_t>(unit)]) return;
    if (name.ends_with("conv.w") || name.ends_with("conv1.w") || name.ends_with("conv2.w")) {
      const double fan_in = static_cast<double>(t.dim(1) * t.dim(2));
      fill_normal(t, prng, 0.0, std::sqrt(2.0 / fan_in));
    } else if (name.ends_with(".gamma") || name.ends_with("running_var")) {
      std::fill(t.values().begin(), t.values().end(), T(1));
    } else if (name.ends_with("head.lin.w")) {
      std::fill(t.values().begin(), t.values().end(),
                static_cast<T>(config_.linear_init_weight));
    } else {
      std::fill(t.values().begin(), t.values().end(), T(0));
    }
  });
}

template <typename T>
void DenseNetModel<T>::reinit_unfrozen(std::uint64_t new_seed) {
  seed = new_seed;
  Prng prng(new_seed);
  reinit_unfrozen(prng);
}

template <typename T>
void DenseNetModel<T>::freeze_prefix(int k) {
  if (k < 0 || k > kNumBlockUnits) {
    throw OutOfRange("freeze prefix must be in [0, 9], got " + std::to_string(k));
  }
  for (int u = 0; u < kNumBlockUnits; ++u) {
    trainable_[static_cast<std::size_t>(u)] = u >= k;
  }
  visit([&](const std::string&, BlockUnit unit, Tensor<T>& t, bool is_param) {
    t.set_requires_grad(is_param && trainable_[static_cast<std::size_t>(unit)]);
  });
}

template <typename T>
std::vector<BlockUnit> DenseNetModel<T>::trainable_units() const {
  std::vector<BlockUnit> units;
  for (int u = 0; u < kNumBlockUnits; ++u) {
    if (trainable_[static_cast<std::size_t>(u)]) units.push_back(static_cast<BlockUnit>(u));
  }
  return units;
}

template <typename T>
BatchNormMode DenseNetModel<T>::effective_mode(BlockUnit unit, BatchNormMode mode) const {
  // Frozen units keep their running statistics fixed and normalize by them.
  if (!trainable_[static_cast<std::size_t>(unit)]) return BatchNormMode::kEval;
  return mode;
}

template <typename T>
Tensor<T> DenseNetModel<T>::dense_layer_forward(const Tensor<T>& x, DenseLayerParams<T>& layer,
                                                BatchNormMode mode, Tape<T>* tape) {
  const Tensor<T> none;
  Tensor<T> h = batchnorm1d(x, layer.bn1.gamma, layer.bn1.beta, layer.bn1.running_mean,
                            layer.bn1.running_var, mode, 0.1, 1e-5, tape);
  h = relu(h, tape);
  h = conv1d(h, layer.conv1_w, none, 1, 0, tape);
  h = batchnorm1d(h, layer.bn2.gamma, layer.bn2.beta, layer.bn2.running_mean,
                  layer.bn2.running_var, mode, 0.1, 1e-5, tape);
  h = relu(h, tape);
  h = conv1d(h, layer.conv2_w, none, 1, 1, tape);
  return concat_channels<T>({x, h}, tape);
}

template <typename T>
Tensor<T> DenseNetModel<T>::forward(const Tensor<T>& x, BatchNormMode mode, Tape<T>* tape) {
  if (!x.defined() || x.shape().size() != 3 || x.dim(1) != config_.input_leads ||
      x.dim(2) != config_.input_len) {
    throw ShapeMismatch("forward expects B x " + std::to_string(config_.input_leads) + " x " +
                        std::to_string(config_.input_len) + " input");
  }
  const Tensor<T> none;

  BatchNormMode m = effective_mode(BlockUnit::kStem, mode);
  Tensor<T> h = conv1d(x, stem_conv_w_, none, 2, 3, tape);
  h = batchnorm1d(h, stem_bn_.gamma, stem_bn_.beta, stem_bn_.running_mean,
                  stem_bn_.running_var, m, 0.1, 1e-5, tape);
  h = relu(h, tape);
  h = maxpool1d(h, 3, 2, 1, tape);

  static constexpr BlockUnit kDenseUnits[4] = {BlockUnit::kDense1, BlockUnit::kDense2,
                                               BlockUnit::kDense3, BlockUnit::kDense4};
  static constexpr BlockUnit kTransUnits[3] = {BlockUnit::kTrans1, BlockUnit::kTrans2,
                                               BlockUnit::kTrans3};
  for (int block = 0; block < 4; ++block) {
    m = effective_mode(kDenseUnits[block], mode);
    for (auto& layer : blocks_[static_cast<std::size_t>(block)].layers) {
      h = dense_layer_forward(h, layer, m, tape);
    }
    if (block < 3) {
      auto& trans = transitions_[static_cast<std::size_t>(block)];
      m = effective_mode(kTransUnits[block], mode);
      h = batchnorm1d(h, trans.bn.gamma, trans.bn.beta, trans.bn.running_mean,
                      trans.bn.running_var, m, 0.1, 1e-5, tape);
      h = relu(h, tape);
      h = conv1d(h, trans.conv_w, none, 1, 0, tape);
      h = avgpool1d(h, 2, 2, tape);
    }
  }

  m = effective_mode(BlockUnit::kHead, mode);
  h = batchnorm1d(h, head_bn_.gamma, head_bn_.beta, head_bn_.running_mean,
                  head_bn_.running_var, m, 0.1, 1e-5, tape);
  h = relu(h, tape);
  h = adaptive_avg_pool1d(h, tape);
  h = reshape(h, {h.dim(0), h.dim(1)}, tape);
  return linear(h, head_lin_w_, head_lin_b_, tape);
}

template <typename T>
std::vector<typename DenseNetModel<T>::NamedTensor> DenseNetModel<T>::named_tensors() {
  std::vector<NamedTensor> out;
  visit([&](const std::string& name, BlockUnit unit, Tensor<T>& t, bool is_param) {
    out.push_back({name, unit, &t, is_param});
  });
  return out;
}

template <typename T>
std::vector<Tensor<T>*> DenseNetModel<T>::trainable_params() {
  std::vector<Tensor<T>*> out;
  visit([&](const std::string&, BlockUnit unit, Tensor<T>& t, bool is_param) {
    if (is_param && trainable_[static_cast<std::size_t>(unit)]) out.push_back(&t);
  });
  return out;
}

template <typename T>
std::size_t DenseNetModel<T>::total_tensor_count() {
  std::size_t n = 0;
  visit([&](const std::string&, BlockUnit, Tensor<T>&, bool) { ++n; });
  return n;
}

template <typename T>
std::vector<int> DenseNetModel<T>::channel_trace() const {
  std::vector<int> trace;
  int channels = config_.init_channels;
  trace.push_back(channels);
  for (int block = 0; block < 4; ++block) {
    channels += config_.block_layers[static_cast<std::size_t>(block)] * config_.growth_rate;
    trace.push_back(channels);
    if (block < 3) {
      channels = static_cast<int>(std::floor(channels * config_.compression));
      trace.push_back(channels);
    }
  }
  return trace;
}

template <typename T>
std::vector<int> DenseNetModel<T>::length_trace() const {
  const auto conv_out = [](int len, int kernel, int stride, int pad) {
    return (len + 2 * pad - kernel) / stride + 1;
  };
  std::vector<int> trace;
  int len = config_.input_len;
  trace.push_back(len);
  len = conv_out(len, 7, 2, 3);
  trace.push_back(len);  // stem conv
  len = conv_out(len, 3, 2, 1);
  trace.push_back(len);  // stem pool
  for (int block = 0; block < 3; ++block) {
    len = conv_out(len, 2, 2, 0);
    trace.push_back(len);  // transition pool
  }
  return trace;
}

template class DenseNetModel<float>;
template class DenseNetModel<double>;

}  // namespace ecgdnn
