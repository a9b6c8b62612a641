#include "ecgdnn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "ecgdnn/csv.hpp"
#include "ecgdnn/errors.hpp"
#include "ecgdnn/prng.hpp"

namespace ecgdnn {

template <typename T>
AdamOptimizer<T>::AdamOptimizer(std::vector<Tensor<T>*> params, double beta1, double beta2,
                                double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto* p : params_) {
    m_.emplace_back(static_cast<std::size_t>(p->numel()), T(0));
    v_.emplace_back(static_cast<std::size_t>(p->numel()), T(0));
  }
}

template <typename T>
void AdamOptimizer<T>::step(double lr) {
  ++step_count_;
  const T b1 = static_cast<T>(beta1_);
  const T b2 = static_cast<T>(beta2_);
  const T bias1 = static_cast<T>(1.0 - std::pow(beta1_, static_cast<double>(step_count_)));
  const T bias2 = static_cast<T>(1.0 - std::pow(beta2_, static_cast<double>(step_count_)));
  const T alpha = static_cast<T>(lr);
  const T eps = static_cast<T>(eps_);

  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor<T>& p = *params_[i];
    if (!p.has_grad()) continue;  // no gradient flowed this step
    const T* g = p.grad().data();
    T* value = p.data();
    T* m = m_[i].data();
    T* v = v_[i].data();
    const std::size_t n = m_[i].size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      const T m_hat = m[j] / bias1;
      const T v_hat = v[j] / bias2;
      value[j] -= alpha * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template <typename T>
void AdamOptimizer<T>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

template class AdamOptimizer<float>;
template class AdamOptimizer<double>;

double PlateauScheduler::step(double val_loss, double current_lr) {
  if (val_loss < best_) {
    best_ = val_loss;
    bad_epochs_ = 0;
    return current_lr;
  }
  if (++bad_epochs_ >= patience_) {
    bad_epochs_ = 0;
    return current_lr * factor_;
  }
  return current_lr;
}

double plateau_step(const std::vector<double>& val_losses, double current_lr,
                    const TrainConfig& cfg) {
  // The firing pattern depends only on the loss sequence, so replay the
  // counter over the whole history; a firing on the last entry reduces the
  // rate currently in effect (earlier firings are already reflected in it).
  PlateauScheduler scheduler(cfg.plateau_factor, cfg.plateau_patience);
  bool last_fired = false;
  for (double loss : val_losses) {
    last_fired = scheduler.step(loss, 1.0) != 1.0;
  }
  return last_fired ? current_lr * cfg.plateau_factor : current_lr;
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
  std::string out = "epoch,train_loss,val_loss,lr,seconds\n";
  char buf[192];
  for (const auto& e : history.epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.3f\n", e.epoch, e.train_loss,
                  e.val_loss, e.lr, e.seconds);
    out += buf;
  }
  write_text_file(path, out);
}

double pos_weight_from_counts(std::int64_t n_pos, std::int64_t n_neg) {
  if (n_pos < 1 || n_neg < 1) {
    throw DegenerateClass("need at least one positive and one negative (have " +
                          std::to_string(n_pos) + " / " + std::to_string(n_neg) + ")");
  }
  return static_cast<double>(n_neg) / static_cast<double>(n_pos);
}

double compute_pos_weight(const DatasetManifest& manifest, Target target) {
  std::int64_t n_pos = 0, n_neg = 0;
  for (const auto& row : manifest.rows) {
    if (row.split != Split::kTrain) continue;
    row.labels.get(target) ? ++n_pos : ++n_neg;
  }
  return pos_weight_from_counts(n_pos, n_neg);
}

double compute_pos_weight(const SampleSource& samples, Target target) {
  std::int64_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples.labels(i).get(target) ? ++n_pos : ++n_neg;
  }
  return pos_weight_from_counts(n_pos, n_neg);
}

namespace {

// Copies a batch of tensors and labels out of the source.
void fill_batch(const SampleSource& samples, const std::vector<std::size_t>& order,
                std::size_t begin, std::size_t end, Target target, Tensor<float>& x,
                Tensor<float>& y) {
  const std::size_t tensor_len = samples.tensor_len();
  float* xp = x.data();
  float* yp = y.data();
  for (std::size_t i = begin; i < end; ++i) {
    const std::size_t idx = order[i];
    samples.fill_tensor(idx, xp + (i - begin) * tensor_len);
    yp[i - begin] = samples.labels(idx).get(target) ? 1.0f : 0.0f;
  }
}

void check_source_shape(const Model& model, const SampleSource& samples, const char* what) {
  const auto [leads, len] = samples.tensor_shape();
  if (model.config().input_leads != leads || model.config().input_len != len) {
    throw ShapeMismatch(std::string(what) + ": source tensors are " + std::to_string(leads) +
                        " x " + std::to_string(len) + ", model expects " +
                        std::to_string(model.config().input_leads) + " x " +
                        std::to_string(model.config().input_len));
  }
}

struct WeightSnapshot {
  std::vector<std::vector<float>> values;

  static WeightSnapshot capture(Model& model) {
    WeightSnapshot snap;
    for (const auto& entry : model.named_tensors()) {
      snap.values.push_back(entry.tensor->values());
    }
    return snap;
  }

  void restore(Model& model) const {
    auto tensors = model.named_tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      tensors[i].tensor->values() = values[i];
    }
  }
};

}  // namespace

double evaluate_loss(Model& model, const SampleSource& samples, Target target,
                     double pos_weight, int batch_size) {
  const std::size_t n = samples.size();
  if (n == 0) throw EmptyDataset("evaluate_loss on empty set");
  check_source_shape(model, samples, "evaluate_loss");
  const auto [leads, len] = samples.tensor_shape();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  double total = 0.0;
  for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(n, begin + static_cast<std::size_t>(batch_size));
    const std::int64_t b = static_cast<std::int64_t>(end - begin);
    Tensor<float> x = Tensor<float>::zeros({b, leads, len});
    Tensor<float> y = Tensor<float>::zeros({b, 1});
    fill_batch(samples, order, begin, end, target, x, y);
    Tensor<float> logits = model.forward(x, BatchNormMode::kEval, nullptr);
    Tensor<float> loss = bce_with_logits<float>(logits, y, pos_weight, nullptr);
    total += static_cast<double>(loss.values()[0]) * static_cast<double>(b);
  }
  return total / static_cast<double>(n);
}

TrainHistory train(Model& model, const SampleSource& train_set, const SampleSource& val_set,
                   Target target, const TrainConfig& cfg) {
  const std::size_t n_train = train_set.size();
  if (n_train == 0 || val_set.size() == 0) {
    throw EmptyDataset("train needs non-empty train and val sets");
  }
  check_source_shape(model, train_set, "train");
  check_source_shape(model, val_set, "train (val)");
  const auto [leads, len] = train_set.tensor_shape();

  const double pos_weight =
      cfg.pos_weight ? *cfg.pos_weight : compute_pos_weight(train_set, target);

  model.seed = cfg.seed;
  Prng shuffle_rng(Prng::derive_seed(cfg.seed, 0));
  AdamOptimizer<float> optimizer(model.trainable_params(), cfg.adam_beta1, cfg.adam_beta2,
                                 cfg.adam_eps);
  PlateauScheduler scheduler(cfg.plateau_factor, cfg.plateau_patience);
  EarlyStopTracker stopper(cfg.early_stop_patience);

  TrainHistory history;
  history.pos_weight_used = pos_weight;
  history.stop_reason = "max_epochs";

  double lr = cfg.lr;
  WeightSnapshot best_weights = WeightSnapshot::capture(model);

  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);

    double train_loss_sum = 0.0;
    std::size_t trained = 0;
    for (std::size_t begin = 0; begin < n_train;
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n_train, begin + static_cast<std::size_t>(cfg.batch_size));
      const std::int64_t b = static_cast<std::int64_t>(end - begin);
      if (b * len < 2) {
        if (cfg.log) *cfg.log << "skipping degenerate batch of " << b << " sample(s)\n";
        continue;
      }
      Tensor<float> x = Tensor<float>::zeros({b, leads, len});
      Tensor<float> y = Tensor<float>::zeros({b, 1});
      fill_batch(train_set, order, begin, end, target, x, y);

      Tape<float> tape;
      Tensor<float> logits = model.forward(x, BatchNormMode::kTrain, &tape);
      Tensor<float> loss = bce_with_logits(logits, y, pos_weight, &tape);
      const double batch_loss = static_cast<double>(loss.values()[0]);
      if (!std::isfinite(batch_loss)) {
        throw NonFiniteLoss("train loss became " + std::to_string(batch_loss) + " at epoch " +
                            std::to_string(epoch));
      }
      // With every unit frozen (k = 9) no gradient path exists; the epoch
      // loop still runs so the protocol stays uniform across the grid.
      if (loss.requires_grad()) {
        optimizer.zero_grad();
        tape.backward(loss);
        optimizer.step(lr);
      }

      train_loss_sum += batch_loss * static_cast<double>(b);
      trained += static_cast<std::size_t>(b);
    }
    const double train_loss = trained ? train_loss_sum / static_cast<double>(trained) : 0.0;

    const double val_loss = evaluate_loss(model, val_set, target, pos_weight, cfg.batch_size);
    if (!std::isfinite(val_loss)) {
      throw NonFiniteLoss("validation loss became non-finite at epoch " +
                          std::to_string(epoch));
    }

    const auto t1 = std::chrono::steady_clock::now();
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = train_loss;
    stats.val_loss = val_loss;
    stats.lr = lr;
    stats.seconds = std::chrono::duration<double>(t1 - t0).count();
    history.epochs.push_back(stats);
    if (cfg.log) {
      *cfg.log << "epoch " << epoch << " train_loss " << train_loss << " val_loss " << val_loss
               << " lr " << lr << "\n";
    }

    const bool stop = stopper.observe(epoch, val_loss);
    if (stopper.improved_last()) {
      history.best_epoch = epoch;
      best_weights = WeightSnapshot::capture(model);
    }
    if (stop) {
      history.stop_reason = "early_stop";
      break;
    }
    lr = scheduler.step(val_loss, lr);
  }

  best_weights.restore(model);
  return history;
}

TrainHistory finetune(Model& pretrained, const SampleSource& train_set,
                      const SampleSource& val_set, Target target, int k_frozen, double lr,
                      TrainConfig cfg) {
  pretrained.freeze_prefix(k_frozen);
  pretrained.reinit_unfrozen(Prng::derive_seed(cfg.seed, 1));
  cfg.lr = lr;
  return train(pretrained, train_set, val_set, target, cfg);
}

}  // namespace ecgdnn
