#include <doctest.h>

#include <cmath>

#include "ecgdnn/cache.hpp"
#include "ecgdnn/errors.hpp"
#include "ecgdnn/prng.hpp"
#include "ecgdnn/train.hpp"

using namespace ecgdnn;

namespace {

DenseNetConfig tiny_config() {
  DenseNetConfig cfg;
  cfg.init_channels = 8;
  cfg.growth_rate = 4;
  cfg.block_layers = {1, 1, 1, 1};
  cfg.bn_size = 2;
  cfg.compression = 0.5;
  cfg.input_leads = 2;
  cfg.input_len = 160;
  cfg.preset = "custom";
  return cfg;
}

// Tiny separable task: positives carry a sine on lead 0.
VectorSamples tiny_dataset(int n, std::uint64_t seed, double prevalence = 0.5) {
  VectorSamples samples(2, 160);
  Prng rng(seed);
  for (int i = 0; i < n; ++i) {
    const bool positive = rng.uniform() < prevalence;
    std::vector<float> tensor(2 * 160);
    for (auto& v : tensor) v = static_cast<float>(0.3 * rng.normal());
    if (positive) {
      for (int t = 0; t < 160; ++t) {
        tensor[t] += static_cast<float>(std::sin(2.0 * M_PI * 8.0 * t / 160.0));
      }
    }
    LabelSet labels;
    labels.set(Target::kAfib, positive);
    samples.add("t" + std::to_string(i), std::move(tensor), labels);
  }
  return samples;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("pos_weight follows N_neg / N_pos") {
  CHECK(pos_weight_from_counts(14942, 549279 - 14942) == doctest::Approx(35.76).epsilon(0.0003));
  CHECK(pos_weight_from_counts(50, 50) == 1.0);
  CHECK(pos_weight_from_counts(3, 9) == 3.0);
  CHECK_THROWS_AS(pos_weight_from_counts(0, 10), DegenerateClass);
  CHECK_THROWS_AS(pos_weight_from_counts(10, 0), DegenerateClass);

  DatasetManifest manifest;
  for (int i = 0; i < 12; ++i) {
    ManifestRow row;
    row.record_id = std::to_string(i);
    row.labels.set(Target::kPvc, i < 3);
    row.split = i < 11 ? Split::kTrain : Split::kTest;  // one test row excluded
    manifest.rows.push_back(row);
  }
  CHECK(compute_pos_weight(manifest, Target::kPvc) == doctest::Approx(8.0 / 3.0));
}

TEST_CASE("adam first step and zero-grad behavior") {
  auto p = Tensor<double>::from_values({1}, {1.0}, true);
  AdamOptimizer<double> opt({&p});
  CHECK(opt.num_entries() == 1);

  p.grad_data()[0] = 1.0;
  opt.step(0.003);
  // bias-corrected m_hat/(sqrt(v_hat)+eps) = 1/(1+1e-8)
  CHECK(p.values()[0] == doctest::Approx(1.0 - 0.003).epsilon(1e-8));

  // zero gradient stream leaves the parameter where it is
  auto q = Tensor<double>::from_values({3}, {1.0, 2.0, 3.0}, true);
  AdamOptimizer<double> opt2({&q});
  q.zero_grad();
  for (int i = 0; i < 5; ++i) opt2.step(0.1);
  CHECK(q.values() == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("adam 10-step trace matches the independently derived oracle") {
  // Quadratic f(t) = t^2/2, grad = t, theta0 = 1, lr = 0.1. The expected
  // sequence was computed independently step by step in double precision.
  const double expected[10] = {
      0.900000001,
      0.8004122297123382,
      0.701586274504415,
      0.603939062682108,
      0.507963661927221,
      0.41423645920501484,
      0.32342070867887096,
      0.23626372875154017,
      0.15358456473296608,
      0.07624916061975533,
  };
  auto theta = Tensor<double>::from_values({1}, {1.0}, true);
  AdamOptimizer<double> opt({&theta});
  for (int step = 0; step < 10; ++step) {
    theta.zero_grad();
    theta.grad_data()[0] = theta.values()[0];
    opt.step(0.1);
    CHECK(std::abs(theta.values()[0] - expected[step]) < 1e-10);
  }
}

TEST_CASE("plateau rule traces") {
  TrainConfig cfg;  // factor 0.8, patience 3

  SUBCASE("fires after three non-improving epochs") {
    PlateauScheduler sched(0.8, 3);
    double lr = 0.003;
    const double losses[5] = {1.0, 0.9, 0.91, 0.92, 0.93};
    for (int i = 0; i < 4; ++i) {
      lr = sched.step(losses[i], lr);
      CHECK(lr == 0.003);
    }
    lr = sched.step(losses[4], lr);
    CHECK(lr == doctest::Approx(0.0024).epsilon(1e-12));

    CHECK(plateau_step({1.0, 0.9, 0.91, 0.92, 0.93}, 0.003, cfg) ==
          doctest::Approx(0.0024).epsilon(1e-12));
    CHECK(plateau_step({1.0, 0.9, 0.91, 0.92}, 0.003, cfg) == 0.003);
  }

  SUBCASE("monotone improvement never reduces") {
    PlateauScheduler sched(0.8, 3);
    double lr = 0.003;
    for (int i = 0; i < 50; ++i) lr = sched.step(1.0 / (i + 1), lr);
    CHECK(lr == 0.003);
  }

  SUBCASE("two consecutive plateaus compound") {
    PlateauScheduler sched(0.8, 3);
    double lr = 0.003;
    // best 0.5, then six non-improving epochs: fires at #3 and #6
    const double losses[7] = {0.5, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6};
    for (double loss : losses) lr = sched.step(loss, lr);
    CHECK(lr == doctest::Approx(0.00192).epsilon(1e-12));
    CHECK(lr == doctest::Approx(0.003 * 0.8 * 0.8).epsilon(1e-12));
  }

  SUBCASE("counter resets after firing") {
    PlateauScheduler sched(0.8, 3);
    double lr = 1.0;
    sched.step(0.5, lr);
    lr = sched.step(0.6, lr);
    lr = sched.step(0.6, lr);
    lr = sched.step(0.6, lr);  // fires here
    CHECK(lr == doctest::Approx(0.8));
    lr = sched.step(0.6, lr);  // counter restarted: no immediate second firing
    CHECK(lr == doctest::Approx(0.8));
  }
}

TEST_CASE("early stopping tracker") {
  SUBCASE("stops exactly patience epochs after the best") {
    EarlyStopTracker tracker(20);
    int stop_epoch = 0;
    for (int epoch = 1; epoch <= 100; ++epoch) {
      const double loss = epoch <= 5 ? 1.0 / epoch : 0.2274;  // best at 5, flat after
      if (tracker.observe(epoch, loss)) {
        stop_epoch = epoch;
        break;
      }
    }
    CHECK(stop_epoch == 25);
    CHECK(tracker.best_epoch() == 5);
  }

  SUBCASE("strictly improving losses never stop") {
    EarlyStopTracker tracker(20);
    bool stopped = false;
    for (int epoch = 1; epoch <= 100; ++epoch) {
      if (tracker.observe(epoch, 1.0 / epoch)) stopped = true;
    }
    CHECK_FALSE(stopped);
    CHECK(tracker.best_epoch() == 100);
  }

  SUBCASE("ties are not improvements") {
    EarlyStopTracker tracker(2);
    CHECK_FALSE(tracker.observe(1, 0.5));
    CHECK_FALSE(tracker.observe(2, 0.5));
    CHECK(tracker.observe(3, 0.5));
    CHECK(tracker.best_epoch() == 1);
  }
}

TEST_CASE("train learns a separable toy task deterministically") {
  const auto train_set = tiny_dataset(96, 1);
  const auto val_set = tiny_dataset(32, 2);

  TrainConfig cfg;
  cfg.max_epochs = 8;
  cfg.batch_size = 16;
  cfg.seed = 11;
  cfg.early_stop_patience = 20;

  Model m1(tiny_config());
  m1.init_params(cfg.seed);
  const auto h1 = train(m1, train_set, val_set, Target::kAfib, cfg);

  Model m2(tiny_config());
  m2.init_params(cfg.seed);
  const auto h2 = train(m2, train_set, val_set, Target::kAfib, cfg);

  // bit-identical history and weights for the same seed
  REQUIRE(h1.epochs.size() == h2.epochs.size());
  for (std::size_t i = 0; i < h1.epochs.size(); ++i) {
    CHECK(h1.epochs[i].train_loss == h2.epochs[i].train_loss);
    CHECK(h1.epochs[i].val_loss == h2.epochs[i].val_loss);
    CHECK(h1.epochs[i].lr == h2.epochs[i].lr);
  }
  auto t1 = m1.named_tensors();
  auto t2 = m2.named_tensors();
  for (std::size_t i = 0; i < t1.size(); ++i) {
    CHECK(t1[i].tensor->values() == t2[i].tensor->values());
  }

  // training made progress
  CHECK(h1.epochs.back().train_loss < h1.epochs.front().train_loss);

  // the returned weights reproduce the best recorded validation loss
  double best = h1.epochs.front().val_loss;
  for (const auto& e : h1.epochs) best = std::min(best, e.val_loss);
  const double replayed =
      evaluate_loss(m1, val_set, Target::kAfib, h1.pos_weight_used, cfg.batch_size);
  CHECK(replayed == doctest::Approx(best).epsilon(1e-6));
  CHECK(h1.best_epoch >= 1);

  // lr sequence is exactly lr0 * factor^r
  for (const auto& e : h1.epochs) {
    const double ratio = e.lr / cfg.lr;
    const double r = std::log(ratio) / std::log(cfg.plateau_factor);
    CHECK(std::abs(r - std::round(r)) < 1e-9);
  }

  // early-stop arithmetic when it triggered
  if (h1.stop_reason == "early_stop") {
    CHECK(h1.epochs.back().epoch - h1.best_epoch == cfg.early_stop_patience);
  }
}

TEST_CASE("train rejects empty datasets") {
  VectorSamples empty(2, 160);
  const auto val = tiny_dataset(8, 3);
  Model model(tiny_config());
  model.init_params(1);
  TrainConfig cfg;
  CHECK_THROWS_AS(train(model, empty, val, Target::kAfib, cfg), EmptyDataset);
}

TEST_CASE("finetune freezes the prefix bytes and the optimizer skips them") {
  const auto pretrain_set = tiny_dataset(64, 5);
  const auto val_set = tiny_dataset(24, 6);

  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.batch_size = 16;
  cfg.seed = 21;

  Model model(tiny_config());
  model.init_params(cfg.seed);
  train(model, pretrain_set, val_set, Target::kAfib, cfg);

  // Snapshot the pretrained state, then fine-tune with k = 7 frozen.
  std::vector<std::vector<float>> pretrained;
  for (const auto& entry : model.named_tensors()) pretrained.push_back(entry.tensor->values());

  const auto target_set = tiny_dataset(48, 7);
  const auto target_val = tiny_dataset(16, 8);
  TrainConfig ft_cfg;
  ft_cfg.max_epochs = 4;
  ft_cfg.batch_size = 16;
  ft_cfg.seed = 22;
  const auto history = finetune(model, target_set, target_val, Target::kAfib, 7, 0.003, ft_cfg);
  CHECK(!history.epochs.empty());

  auto tensors = model.named_tensors();
  bool dense4_or_head_changed = false;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const int unit = static_cast<int>(tensors[i].unit);
    if (unit < 7) {
      CHECK(tensors[i].tensor->values() == pretrained[i]);  // frozen prefix, byte-equal
    } else if (tensors[i].tensor->values() != pretrained[i]) {
      dense4_or_head_changed = true;
    }
  }
  CHECK(dense4_or_head_changed);

  // optimizer state excludes frozen tensors
  AdamOptimizer<float> opt(model.trainable_params());
  std::size_t trainable_param_count = 0;
  for (const auto& entry : tensors) {
    if (entry.is_param && static_cast<int>(entry.unit) >= 7) ++trainable_param_count;
  }
  CHECK(opt.num_entries() == trainable_param_count);

  // k = 0 reduces to a warm start over every unit
  Model warm(tiny_config());
  warm.init_params(1);
  finetune(warm, target_set, target_val, Target::kAfib, 0, 0.003, ft_cfg);
  CHECK(warm.trainable_units().size() == 9);
}

}  // TEST_SUITE
