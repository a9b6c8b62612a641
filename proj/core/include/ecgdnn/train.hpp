#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ecgdnn/cache.hpp"
#include "ecgdnn/densenet.hpp"
#include "ecgdnn/manifest.hpp"

namespace ecgdnn {

struct TrainConfig {
  double lr = 0.003;
  double plateau_factor = 0.8;
  int plateau_patience = 3;
  int max_epochs = 100;
  int early_stop_patience = 20;
  int batch_size = 256;
  std::uint64_t seed = 0;
  std::optional<double> pos_weight;  // unset: N_neg/N_pos from the train set
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::ostream* log = nullptr;  // human-readable progress, one line per epoch
};

/// Bias-corrected Adam over a fixed set of parameter tensors. Frozen tensors
/// never enter the state: the entry list is exactly what the constructor
/// received.
template <typename T>
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Tensor<T>*> params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  /// One update from the gradients currently stored on the parameters.
  void step(double lr);

  std::size_t num_entries() const { return params_.size(); }
  const std::vector<Tensor<T>*>& params() const { return params_; }
  std::int64_t step_count() const { return step_count_; }

  void zero_grad();

 private:
  std::vector<Tensor<T>*> params_;
  std::vector<std::vector<T>> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t step_count_ = 0;
};

/// Reduce-on-plateau: after `patience` consecutive epochs whose validation
/// loss failed to improve on the best seen (strictly lower counts as an
/// improvement), multiply the learning rate by `factor` and reset the
/// counter. No cooldown, no lower bound.
class PlateauScheduler {
 public:
  PlateauScheduler(double factor, int patience) : factor_(factor), patience_(patience) {}

  /// Feeds one epoch's validation loss; returns the (possibly reduced)
  /// learning rate to use from the next epoch on.
  double step(double val_loss, double current_lr);

  int bad_epochs() const { return bad_epochs_; }

 private:
  double factor_;
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

/// Pure-function form: replays the whole loss history and reports what the
/// learning rate becomes after its last entry, given the rate currently in
/// effect.
double plateau_step(const std::vector<double>& val_losses, double current_lr,
                    const TrainConfig& cfg);

/// Early stopping and best-epoch bookkeeping: training halts once the
/// validation loss has gone `patience` consecutive epochs without a new
/// strict best.
class EarlyStopTracker {
 public:
  explicit EarlyStopTracker(int patience) : patience_(patience) {}

  /// Feeds one epoch's validation loss; returns true when training should
  /// stop after this epoch.
  bool observe(int epoch, double val_loss) {
    if (val_loss < best_loss_) {
      best_loss_ = val_loss;
      best_epoch_ = epoch;
      epochs_since_best_ = 0;
      improved_ = true;
      return false;
    }
    improved_ = false;
    return ++epochs_since_best_ >= patience_;
  }

  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }
  bool improved_last() const { return improved_; }

 private:
  int patience_;
  double best_loss_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int epochs_since_best_ = 0;
  bool improved_ = false;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // rate in effect during this epoch's updates
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  std::string stop_reason;  // "max_epochs" or "early_stop"
  double pos_weight_used = 1.0;
};

/// Training-log CSV: epoch, train_loss, val_loss, lr, seconds.
void write_history_csv(const TrainHistory& history, const std::string& path);

double pos_weight_from_counts(std::int64_t n_pos, std::int64_t n_neg);

/// N_negative / N_positive over the manifest's train rows.
double compute_pos_weight(const DatasetManifest& manifest, Target target);
double compute_pos_weight(const SampleSource& samples, Target target);

/// The full protocol: seeded shuffling, weighted BCE batches, Adam, plateau
/// scheduling, early stopping after `early_stop_patience` epochs without a
/// new best validation loss, and restoration of the best-epoch weights into
/// `model` before returning.
TrainHistory train(Model& model, const SampleSource& train_set, const SampleSource& val_set,
                   Target target, const TrainConfig& cfg);

/// Freeze the first `k_frozen` units of the pretrained model, re-initialize
/// the rest, then run `train` at the given learning rate.
TrainHistory finetune(Model& pretrained, const SampleSource& train_set,
                      const SampleSource& val_set, Target target, int k_frozen, double lr,
                      TrainConfig cfg);

/// Mean eval-mode loss over a sample set (exposed for tests).
double evaluate_loss(Model& model, const SampleSource& samples, Target target,
                     double pos_weight, int batch_size);

extern template class AdamOptimizer<float>;
extern template class AdamOptimizer<double>;

}  // namespace ecgdnn
