// Acceptance suite: one pass/fail line per criterion.
//
// Usage: acceptance [criterion numbers...]   (default: all)
// Criterion 10 needs a local PTB-XL copy (ECGDNN_PTBXL_DIR); it is skipped
// and non-gating otherwise.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "ecgdnn/cache.hpp"
#include "ecgdnn/checkpoint.hpp"
#include "ecgdnn/crossval.hpp"
#include "ecgdnn/csv.hpp"
#include "ecgdnn/densenet.hpp"
#include "ecgdnn/evaluate.hpp"
#include "ecgdnn/gradcheck.hpp"
#include "ecgdnn/manifest.hpp"
#include "ecgdnn/metadata.hpp"
#include "ecgdnn/parallel.hpp"
#include "ecgdnn/preprocess.hpp"
#include "ecgdnn/prng.hpp"
#include "ecgdnn/synth.hpp"
#include "ecgdnn/train.hpp"
#include "ecgdnn/wfdb.hpp"

using namespace ecgdnn;
namespace fs = std::filesystem;

namespace {

struct CheckFailure {
  std::string message;
};

void expect(bool ok, const std::string& message) {
  if (!ok) throw CheckFailure{message};
}

std::string format_seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f s", s);
  return buf;
}

// ---------------------------------------------------------------------------
// Criterion 1: G-mean arithmetic oracle over the published metric tables.
// ---------------------------------------------------------------------------

struct PublishedTriple {
  const char* row;
  double sens, spec, gmean;
};

// Sens./Spec./G-mean triples as printed in the paper's result tables for the
// DenseNet experiments (models on both test sets, the halved-training runs,
// and the 500-record annotator study).
const PublishedTriple kPublishedTriples[] = {
    // DenseNet models evaluated on the large-registry test set
    {"tis-test PTBXL_dn AFIB", 0.956, 0.980, 0.968},
    {"tis-test PTBXL_dn 1AVB", 0.750, 0.940, 0.840},
    {"tis-test PTBXL_dn RBBB", 0.913, 0.907, 0.910},
    {"tis-test PTBXL_dn LBBB", 0.732, 0.985, 0.849},
    {"tis-test PTBXL_dn STACH", 0.504, 0.980, 0.703},
    {"tis-test PTBXL_dn SBRAD", 0.538, 0.954, 0.716},
    {"tis-test PTBXL_dn PVC", 0.931, 0.931, 0.931},
    {"tis-test TIS_dn AFIB", 0.982, 0.991, 0.986},
    {"tis-test TIS_dn 1AVB", 0.963, 0.933, 0.948},
    {"tis-test TIS_dn RBBB", 0.950, 0.917, 0.933},
    {"tis-test TIS_dn LBBB", 0.911, 0.977, 0.943},
    {"tis-test TIS_dn STACH", 0.977, 0.937, 0.957},
    {"tis-test TIS_dn SBRAD", 0.987, 0.945, 0.966},
    {"tis-test TIS_dn PVC", 0.987, 0.984, 0.986},
    // DenseNet models evaluated on the PTB-XL test fold
    {"ptbxl-test PTBXL_dn AFIB", 0.929, 0.969, 0.949},
    {"ptbxl-test PTBXL_dn 1AVB", 0.905, 0.884, 0.894},
    {"ptbxl-test PTBXL_dn RBBB", 0.972, 0.942, 0.957},
    {"ptbxl-test PTBXL_dn LBBB", 0.842, 0.980, 0.908},
    {"ptbxl-test PTBXL_dn STACH", 0.951, 0.962, 0.957},
    {"ptbxl-test PTBXL_dn SBRAD", 0.789, 0.928, 0.856},
    {"ptbxl-test PTBXL_dn PVC", 0.956, 0.953, 0.954},
    {"ptbxl-test TIS_dn AFIB", 0.952, 0.953, 0.953},
    {"ptbxl-test TIS_dn 1AVB", 0.918, 0.859, 0.888},
    {"ptbxl-test TIS_dn RBBB", 0.985, 0.938, 0.961},
    {"ptbxl-test TIS_dn LBBB", 0.992, 0.907, 0.948},
    {"ptbxl-test TIS_dn STACH", 0.982, 0.906, 0.943},
    {"ptbxl-test TIS_dn SBRAD", 0.961, 0.848, 0.902},
    {"ptbxl-test TIS_dn PVC", 0.991, 0.970, 0.981},
    {"ptbxl-test TIS_tuned_dn AFIB", 0.942, 0.972, 0.957},
    {"ptbxl-test TIS_tuned_dn 1AVB", 0.892, 0.923, 0.908},
    {"ptbxl-test TIS_tuned_dn RBBB", 0.985, 0.947, 0.966},
    {"ptbxl-test TIS_tuned_dn LBBB", 0.917, 0.982, 0.949},
    {"ptbxl-test TIS_tuned_dn STACH", 0.963, 0.979, 0.971},
    {"ptbxl-test TIS_tuned_dn SBRAD", 0.891, 0.913, 0.902},
    {"ptbxl-test TIS_tuned_dn PVC", 0.987, 0.980, 0.983},
    // Halved-training comparison (PTB-XL test fold)
    {"halved PTBXL_dn AFIB", 0.929, 0.969, 0.949},
    {"halved PTBXL_dn PVC", 0.956, 0.953, 0.954},
    {"halved TIS_dn AFIB", 0.953, 0.952, 0.953},
    {"halved TIS_dn PVC", 0.991, 0.970, 0.981},
    {"halved hTIS_dn AFIB", 0.946, 0.967, 0.956},
    {"halved hTIS_dn PVC", 0.987, 0.934, 0.960},
    {"halved hTIS_tuned_dn AFIB", 0.935, 0.976, 0.956},
    {"halved hTIS_tuned_dn PVC", 0.996, 0.970, 0.983},
    // 500-record annotator study
    {"doctors PTBXL_dn AFIB", 0.941, 0.961, 0.951},
    {"doctors PTBXL_dn PVC", 0.962, 0.956, 0.959},
    {"doctors TIS_tuned_dn AFIB", 0.941, 0.966, 0.953},
    {"doctors TIS_tuned_dn PVC", 1.000, 0.981, 0.990},
    {"doctors Doctor1 AFIB", 0.941, 0.974, 0.958},
    {"doctors Doctor1 PVC", 0.923, 0.979, 0.951},
    {"doctors Doctor2 AFIB", 0.971, 0.899, 0.934},
    {"doctors Doctor2 PVC", 0.923, 0.992, 0.957},
    {"doctors Doctor3 AFIB", 0.912, 0.981, 0.946},
    {"doctors Doctor3 PVC", 0.962, 0.958, 0.960},
};

std::string criterion_metric_tables() {
  int checked = 0;
  for (const auto& triple : kPublishedTriples) {
    ConfusionMatrix cm;  // synthesize a matrix realizing the published rates
    const std::int64_t pos = 100000, neg = 100000;
    cm.tp = static_cast<std::int64_t>(std::llround(triple.sens * pos));
    cm.fn = pos - cm.tp;
    cm.tn = static_cast<std::int64_t>(std::llround(triple.spec * neg));
    cm.fp = neg - cm.tn;
    const auto m = metrics(cm);
    expect(m.gmean.has_value(), std::string(triple.row) + ": gmean undefined");
    const double direct = std::sqrt(triple.sens * triple.spec);
    expect(std::abs(*m.gmean - direct) < 1e-6,
           std::string(triple.row) + ": metrics() disagrees with direct formula");
    const double rounded = std::round(direct * 1000.0) / 1000.0;
    expect(std::abs(rounded - triple.gmean) <= 0.001 + 1e-9,
           std::string(triple.row) + ": sqrt(" + std::to_string(triple.sens) + "*" +
               std::to_string(triple.spec) + ") = " + std::to_string(rounded) +
               " vs published " + std::to_string(triple.gmean));
    ++checked;
  }
  return std::to_string(checked) + " published triples reproduced within 0.001";
}

// ---------------------------------------------------------------------------
// Criterion 2: gradient checks, primitives and the composed model chain.
// ---------------------------------------------------------------------------

Tensor<double> kink_free(Shape shape, Prng& rng, bool requires_grad = true) {
  Tensor<double> t = Tensor<double>::zeros(std::move(shape), requires_grad);
  for (auto& v : t.values()) {
    v = rng.normal();
    if (std::abs(v) < 0.05) v += v >= 0 ? 0.1 : -0.1;
  }
  return t;
}

Tensor<double> binary_labels(Shape shape, Prng& rng) {
  Tensor<double> t = Tensor<double>::zeros(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return t;
}

std::string criterion_gradchecks() {
  const int seeds = 20;
  double worst_primitive = 0.0;
  for (int seed = 1; seed <= seeds; ++seed) {
    Prng rng(static_cast<std::uint64_t>(seed));
    auto lab2 = binary_labels({2, 1}, rng);

    // conv1d (with bias, stride 2, padding)
    {
      auto x = kink_free({2, 3, 14}, rng);
      auto w = kink_free({4, 3, 5}, rng);
      auto b = kink_free({4}, rng);
      const auto fn = [&](Tape<double>& tape) {
        auto y = conv1d(x, w, b, 2, 2, &tape);
        auto flat = reshape(adaptive_avg_pool1d(y, &tape), {2, 4}, &tape);
        auto lw = Tensor<double>::from_values({1, 4}, {0.9, -1.1, 0.6, 1.4});
        return bce_with_logits(linear(flat, lw, Tensor<double>(), &tape), lab2, 1.0, &tape);
      };
      worst_primitive = std::max(worst_primitive, gradcheck(fn, {x, w, b}));
    }
    // batchnorm, both modes
    for (auto mode : {BatchNormMode::kTrain, BatchNormMode::kEval}) {
      auto x = kink_free({2, 3, 8}, rng);
      auto gamma = kink_free({3}, rng);
      auto beta = kink_free({3}, rng);
      auto rm = Tensor<double>::from_values({3}, {0.15, -0.25, 0.1});
      auto rv = Tensor<double>::from_values({3}, {1.2, 0.7, 1.05});
      const auto fn = [&](Tape<double>& tape) {
        auto y = batchnorm1d(x, gamma, beta, rm, rv, mode, 0.1, 1e-5, &tape);
        auto flat = reshape(adaptive_avg_pool1d(y, &tape), {2, 3}, &tape);
        auto lw = Tensor<double>::from_values({1, 3}, {1.0, -0.6, 0.8});
        return bce_with_logits(linear(flat, lw, Tensor<double>(), &tape), lab2, 1.0, &tape);
      };
      worst_primitive = std::max(worst_primitive, gradcheck(fn, {x, gamma, beta}));
    }
    // relu, sigmoid, pools, concat, linear, bce
    {
      auto x = kink_free({2, 2, 12}, rng);
      auto x2 = kink_free({2, 3, 12}, rng);
      const auto head = [&lab2](Tape<double>& tape, const Tensor<double>& h, int c) {
        auto flat = reshape(adaptive_avg_pool1d(h, &tape), {2, c}, &tape);
        auto lw = Tensor<double>::zeros({1, c});
        for (std::int64_t i = 0; i < c; ++i) lw.data()[i] = 0.5 + 0.3 * static_cast<double>(i);
        return bce_with_logits(linear(flat, lw, Tensor<double>(), &tape), lab2, 1.0, &tape);
      };
      const auto relu_fn = [&](Tape<double>& tape) { return head(tape, relu(x, &tape), 2); };
      const auto sig_fn = [&](Tape<double>& tape) { return head(tape, sigmoid(x, &tape), 2); };
      const auto max_fn = [&](Tape<double>& tape) {
        return head(tape, maxpool1d(x, 3, 2, 1, &tape), 2);
      };
      const auto avg_fn = [&](Tape<double>& tape) {
        return head(tape, avgpool1d(x, 2, 2, &tape), 2);
      };
      const auto cat_fn = [&](Tape<double>& tape) {
        return head(tape, concat_channels<double>({x, x2}, &tape), 5);
      };
      worst_primitive = std::max(worst_primitive, gradcheck(relu_fn, {x}));
      worst_primitive = std::max(worst_primitive, gradcheck(sig_fn, {x}));
      worst_primitive = std::max(worst_primitive, gradcheck(max_fn, {x}));
      worst_primitive = std::max(worst_primitive, gradcheck(avg_fn, {x}));
      worst_primitive = std::max(worst_primitive, gradcheck(cat_fn, {x, x2}));

      auto xf = kink_free({3, 4}, rng);
      auto wf = kink_free({2, 4}, rng);
      auto bf = kink_free({2}, rng);
      auto lab32 = binary_labels({3, 2}, rng);
      const auto lin_fn = [&](Tape<double>& tape) {
        return bce_with_logits(linear(xf, wf, bf, &tape), lab32, 35.76, &tape);
      };
      worst_primitive = std::max(worst_primitive, gradcheck(lin_fn, {xf, wf, bf}));

      auto z = kink_free({4, 1}, rng);
      auto zy = binary_labels({4, 1}, rng);
      const auto bce_fn = [&](Tape<double>& tape) {
        return bce_with_logits(z, zy, 35.76, &tape);
      };
      worst_primitive = std::max(worst_primitive, gradcheck(bce_fn, {z}));
    }
  }
  expect(worst_primitive < 1e-4,
         "primitive gradcheck max rel err " + std::to_string(worst_primitive));

  // Composed chain through the real model: stem -> dense -> transition ->
  // head, gradchecked against every parameter and the input.
  DenseNetConfig micro;
  micro.init_channels = 6;
  micro.growth_rate = 3;
  micro.block_layers = {1, 1, 1, 1};
  micro.bn_size = 2;
  micro.input_leads = 2;
  micro.input_len = 64;
  micro.preset = "custom";

  double worst_chain = 0.0;
  for (int seed = 1; seed <= seeds; ++seed) {
    DenseNetModel<double> model(micro);
    model.init_params(static_cast<std::uint64_t>(seed) * 1000);
    Prng rng(static_cast<std::uint64_t>(seed) + 500);
    auto x = kink_free({2, 2, 64}, rng);
    auto lab = binary_labels({2, 1}, rng);

    // Finite differences need a differentiable point. Fresh-init BN (beta 0,
    // running mean 0) can place downstream ReLUs exactly on their kink: a
    // position whose inputs are all clamped feeds an exactly-zero conv
    // output through an identity-shift BN. Randomizing the BN parameters
    // (which the check differentiates anyway) removes those degeneracies.
    std::vector<Tensor<double>> leaves = {x};
    for (const auto& entry : model.named_tensors()) {
      if (entry.name.ends_with(".gamma")) {
        for (auto& v : entry.tensor->values()) v = rng.uniform(0.8, 1.2);
      } else if (entry.name.ends_with(".beta")) {
        for (auto& v : entry.tensor->values()) {
          v = rng.normal(0.0, 0.2);
          if (std::abs(v) < 0.05) v += v >= 0 ? 0.1 : -0.1;
        }
      } else if (entry.name.ends_with("running_mean")) {
        for (auto& v : entry.tensor->values()) v = rng.normal(0.0, 0.2);
      } else if (entry.name.ends_with("running_var")) {
        for (auto& v : entry.tensor->values()) v = rng.uniform(0.7, 1.4);
      }
      if (entry.is_param) {
        entry.tensor->set_requires_grad(true);
        leaves.push_back(*entry.tensor);
      }
    }
    const auto fn = [&](Tape<double>& tape) {
      auto logits = model.forward(x, BatchNormMode::kEval, &tape);
      return bce_with_logits(logits, lab, 2.5, &tape);
    };
    worst_chain = std::max(worst_chain, gradcheck(fn, leaves));
  }
  expect(worst_chain < 1e-3, "chain gradcheck max rel err " + std::to_string(worst_chain));

  char buf[128];
  std::snprintf(buf, sizeof(buf), "primitives max rel err %.2e, model chain %.2e (%d seeds)",
                worst_primitive, worst_chain, seeds);
  return buf;
}

// ---------------------------------------------------------------------------
// Criterion 3: preprocessing suite.
// ---------------------------------------------------------------------------

std::string criterion_preprocessing() {
  // shape + normalization over a mixed-rate batch of synthetic records
  SynthSpec spec;
  spec.n_records = 24;
  spec.seed = 3434;
  spec.frac_1000hz = 0.5;
  spec.frac_9s = 0.3;
  const auto samples = synth_preprocessed(spec);
  expect(samples.size() == 24, "pipeline rejected clean records");
  for (const auto& sample : samples) {
    expect(sample.tensor.size() == static_cast<std::size_t>(kNumLeads) * kSampleLen,
           "bad tensor shape");
    for (int lead = 0; lead < kNumLeads; ++lead) {
      const float* p = sample.tensor.data() + static_cast<std::size_t>(lead) * kSampleLen;
      double mean = 0.0;
      for (int i = 0; i < kSampleLen; ++i) mean += p[i];
      mean /= kSampleLen;
      double var = 0.0;
      for (int i = 0; i < kSampleLen; ++i) var += (p[i] - mean) * (p[i] - mean);
      var /= kSampleLen;
      expect(std::abs(mean) < 1e-6, "per-lead mean " + std::to_string(mean));
      expect(std::abs(std::sqrt(var) - 1.0) < 1e-5,
             "per-lead std " + std::to_string(std::sqrt(var)));
    }
  }

  // flat-lead rejection
  SynthRecord rec = synth_record(spec, 0);
  std::fill(rec.record.signals[4].begin(), rec.record.signals[4].end(), 0.25);
  auto outcome = run_pipeline(rec.record, LabelSet{});
  expect(std::holds_alternative<Rejection>(outcome) &&
             std::get<Rejection>(outcome).reason == RejectReason::kFlatLead,
         "flat lead not rejected");

  // DC preservation through decimation
  std::vector<double> dc(10000, 0.75);
  for (double v : resample_to_500(dc, 1000.0)) {
    expect(std::abs(v - 0.75) < 1e-6, "DC distorted by resampling");
  }

  // 10 Hz sine amplitude through 1000 -> 500 Hz
  std::vector<double> sine(10000);
  for (std::size_t i = 0; i < sine.size(); ++i) {
    sine[i] = std::sin(2.0 * M_PI * 10.0 * static_cast<double>(i) / 1000.0);
  }
  const auto resampled = resample_to_500(sine, 1000.0);
  double peak = 0.0, max_err = 0.0;
  for (std::size_t j = 64; j + 64 < resampled.size(); ++j) {
    const double expected = std::sin(2.0 * M_PI * 10.0 * static_cast<double>(2 * j) / 1000.0);
    peak = std::max(peak, std::abs(resampled[j]));
    max_err = std::max(max_err, std::abs(resampled[j] - expected));
  }
  expect(std::abs(peak - 1.0) < 0.02, "sine amplitude off by " + std::to_string(peak - 1.0));
  expect(max_err < 0.02, "sine sample error " + std::to_string(max_err));

  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "24 mixed-rate records normalized; sine error %.4f, peak %.4f", max_err, peak);
  return buf;
}

// ---------------------------------------------------------------------------
// Criterion 4: serialization round trips.
// ---------------------------------------------------------------------------

std::string criterion_round_trips() {
  Prng rng(616);
  for (int trial = 0; trial < 100; ++trial) {
    const int nsig = 1 + static_cast<int>(rng.below(12));
    const int nsamp = 20 + static_cast<int>(rng.below(80));
    PhysicalRecord rec;
    rec.record_id = "rt" + std::to_string(trial);
    rec.sampling_rate = 500;
    std::vector<double> gains;
    std::vector<int> baselines;
    for (int s = 0; s < nsig; ++s) {
      gains.push_back(rng.uniform() < 0.5 ? 200.0 : 1000.0);
      baselines.push_back(static_cast<int>(rng.below(200)) - 100);
      std::vector<double> lead(static_cast<std::size_t>(nsamp));
      for (auto& v : lead) v = rng.uniform(-12.0, 12.0);
      rec.signals.push_back(std::move(lead));
    }
    const auto pair = write_wfdb_record(rec, gains, baselines);
    const auto back = read_wfdb_signals(parse_wfdb_header(pair.header_text), pair.dat);
    for (int s = 0; s < nsig; ++s) {
      const double bound = 1.0 / (2.0 * gains[static_cast<std::size_t>(s)]);
      for (int i = 0; i < nsamp; ++i) {
        expect(std::abs(back.signals[s][i] - rec.signals[s][i]) <= bound + 1e-12,
               "quantization bound exceeded");
      }
    }
    const auto rewritten = write_wfdb_record(back, gains, baselines);
    expect(rewritten.dat == pair.dat, "re-written dat differs");
    expect(rewritten.header_text == pair.header_text, "re-written header differs");
  }

  // checkpoint save -> load -> save byte identity
  DenseNetConfig cfg = DenseNetConfig::desk_scale();
  Model model(cfg);
  model.init_params(909);
  model.freeze_prefix(7);
  model.seed = 909;
  const auto dir = fs::temp_directory_path() / "ecgdnn_acceptance";
  fs::create_directories(dir);
  const auto p1 = (dir / "c1.ecgm").string();
  const auto p2 = (dir / "c2.ecgm").string();
  save_checkpoint(model, p1);
  Model loaded = load_checkpoint(p1);
  save_checkpoint(loaded, p2);
  expect(read_binary_file(p1) == read_binary_file(p2), "checkpoint round trip not byte-stable");
  fs::remove(p1);
  fs::remove(p2);

  return "100 WFDB round trips within quantization bound; checkpoint byte-stable";
}

// ---------------------------------------------------------------------------
// Criterion 5: protocol traces.
// ---------------------------------------------------------------------------

std::string criterion_protocol_traces() {
  // plateau: hand-derived sequences
  TrainConfig cfg;
  expect(std::abs(plateau_step({1.0, 0.9, 0.91, 0.92, 0.93}, 0.003, cfg) - 0.0024) < 1e-12,
         "single plateau trace");
  expect(plateau_step({1.0, 0.9, 0.91, 0.92}, 0.003, cfg) == 0.003, "premature firing");
  {
    PlateauScheduler sched(0.8, 3);
    double lr = 0.003;
    for (double loss : {0.5, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6}) lr = sched.step(loss, lr);
    expect(std::abs(lr - 0.00192) < 1e-12, "two-plateau trace gave " + std::to_string(lr));
  }

  // early stopping halts exactly at best_epoch + patience
  {
    EarlyStopTracker tracker(20);
    int stop_epoch = 0;
    for (int epoch = 1; epoch <= 200; ++epoch) {
      const double loss = epoch <= 7 ? 2.0 / epoch : 0.3;
      if (tracker.observe(epoch, loss)) {
        stop_epoch = epoch;
        break;
      }
    }
    expect(tracker.best_epoch() == 7, "best epoch tracking");
    expect(stop_epoch == 27, "stopped at " + std::to_string(stop_epoch));
  }

  // best-checkpoint selection on a crafted loss sequence
  {
    const std::vector<double> losses = {0.9, 0.5, 0.7, 0.4, 0.41, 0.42, 0.39, 0.5, 0.6};
    EarlyStopTracker tracker(20);
    int captured = -1;
    for (std::size_t i = 0; i < losses.size(); ++i) {
      tracker.observe(static_cast<int>(i) + 1, losses[i]);
      if (tracker.improved_last()) captured = static_cast<int>(i) + 1;
    }
    expect(captured == 7, "captured epoch " + std::to_string(captured));
    expect(tracker.best_epoch() == 7, "best epoch");
  }
  return "plateau 0.003 -> 0.0024 -> 0.00192; stop = best + 20; best-epoch capture correct";
}

// ---------------------------------------------------------------------------
// Criterion 6: freezing contract through a real fine-tune.
// ---------------------------------------------------------------------------

std::string criterion_freezing() {
  SynthSpec spec;
  spec.n_records = 72;
  spec.prevalence = 0.5;
  spec.seed = 5151;
  InMemorySamples all(synth_preprocessed(spec));
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < all.size(); ++i) {
    (i % 4 == 3 ? val_idx : train_idx).push_back(i);
  }
  SubsetSamples train_set(all, train_idx), val_set(all, val_idx);

  Model model(DenseNetConfig::desk_scale());
  model.init_params(77);

  TrainConfig cfg;
  cfg.max_epochs = 1;
  cfg.batch_size = 18;
  cfg.seed = 78;
  train(model, train_set, val_set, Target::kAfib, cfg);  // light pretraining

  std::vector<std::vector<float>> pretrained;
  for (const auto& entry : model.named_tensors()) pretrained.push_back(entry.tensor->values());

  TrainConfig ft_cfg;
  ft_cfg.max_epochs = 2;
  ft_cfg.batch_size = 18;
  ft_cfg.seed = 79;
  finetune(model, train_set, val_set, Target::kAfib, 7, 0.003, ft_cfg);

  auto tensors = model.named_tensors();
  std::size_t frozen_checked = 0;
  bool trainable_changed = false;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (static_cast<int>(tensors[i].unit) < 7) {
      expect(std::memcmp(tensors[i].tensor->data(), pretrained[i].data(),
                         pretrained[i].size() * sizeof(float)) == 0,
             "frozen tensor " + tensors[i].name + " changed");
      ++frozen_checked;
    } else if (tensors[i].tensor->values() != pretrained[i]) {
      trainable_changed = true;
    }
  }
  expect(trainable_changed, "no trainable tensor moved during fine-tuning");

  AdamOptimizer<float> opt(model.trainable_params());
  std::size_t expected_entries = 0;
  for (const auto& entry : tensors) {
    if (entry.is_param && static_cast<int>(entry.unit) >= 7) ++expected_entries;
  }
  expect(opt.num_entries() == expected_entries,
         "optimizer holds " + std::to_string(opt.num_entries()) + " entries, expected " +
             std::to_string(expected_entries));
  for (const auto* p : opt.params()) {
    expect(p->requires_grad(), "optimizer entry does not require grad");
  }

  return std::to_string(frozen_checked) +
         " frozen tensors byte-identical (incl. running stats); optimizer holds " +
         std::to_string(expected_entries) + " trainable entries";
}

// ---------------------------------------------------------------------------
// Criterion 7: subsampling oracle at the published scale.
// ---------------------------------------------------------------------------

std::string criterion_subsampling() {
  // Single-label manifest with the published train+val prevalences.
  const std::pair<Target, int> counts[] = {
      {Target::kRbbb, 32465}, {Target::kStach, 34838}, {Target::kSbrad, 25834},
      {Target::kAfib, 14942}, {Target::kPvc, 10090},   {Target::kLbbb, 4828},
      {Target::kAvb1, 9465},
  };
  const int total = 549279;
  DatasetManifest manifest;
  manifest.rows.reserve(total);
  int id = 0;
  for (const auto& [target, n] : counts) {
    for (int i = 0; i < n; ++i) {
      ManifestRow row;
      row.record_id = "s" + std::to_string(id++);
      row.labels.set(target, true);
      manifest.rows.push_back(std::move(row));
    }
  }
  while (id < total) {
    ManifestRow row;
    row.record_id = "s" + std::to_string(id++);
    manifest.rows.push_back(std::move(row));
  }
  expect(manifest.rows.size() == static_cast<std::size_t>(total), "manifest construction");

  const auto half = stratified_halve(manifest, 2024);
  expect(half.rows.size() == 274639,
         "halved to " + std::to_string(half.rows.size()) + ", expected 274639");

  std::string detail = "549279 -> 274639;";
  for (const auto& [target, n] : counts) {
    const double exact = static_cast<double>(n) / 2.0;
    const auto got = static_cast<double>(half.count_positive(target));
    expect(std::abs(got - exact) <= 1.0, std::string(target_name(target)) + " positives " +
                                             std::to_string(got) + " vs exact half " +
                                             std::to_string(exact));
    detail += " " + std::string(target_name(target)) + "->" +
              std::to_string(static_cast<int>(got));
  }

  // AFIB prevalence preserved
  const double before = static_cast<double>(manifest.count_positive(Target::kAfib)) / total;
  const double after = static_cast<double>(half.count_positive(Target::kAfib)) /
                       static_cast<double>(half.rows.size());
  expect(std::abs(before - after) < 1e-4, "prevalence drifted");
  return detail;
}

// ---------------------------------------------------------------------------
// Criterion 8: synthetic end-to-end learning.
// ---------------------------------------------------------------------------

struct SplitSets {
  std::vector<std::size_t> train, val, test;
};

SplitSets split_80_20(std::size_t n, double val_frac, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Prng rng(seed);
  rng.shuffle(order);
  SplitSets sets;
  const std::size_t n_test = n / 5;
  const std::size_t n_pool = n - n_test;
  const std::size_t n_val = static_cast<std::size_t>(std::llround(n_pool * val_frac));
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_test) sets.test.push_back(order[i]);
    else if (i < n_test + n_val) sets.val.push_back(order[i]);
    else sets.train.push_back(order[i]);
  }
  return sets;
}

double gmean_at_half(Model& model, const SampleSource& samples, Target target) {
  const auto result = evaluate(model, samples, target, 0.5, 32);
  return result.metrics.gmean.value_or(0.0);
}

std::string criterion_synthetic_learning() {
  const auto t0 = std::chrono::steady_clock::now();

  SynthSpec spec;
  spec.n_records = 2000;
  spec.prevalence = 0.5;
  spec.seed = 424242;
  spec.burst_freq_hz = 7.0;
  spec.burst_amplitude = 1.25;
  spec.frac_1000hz = 0.15;
  spec.frac_9s = 0.1;
  InMemorySamples all(synth_preprocessed(spec));
  const auto sets = split_80_20(all.size(), 0.1, 11);
  SubsetSamples train_set(all, sets.train), val_set(all, sets.val), test_set(all, sets.test);

  TrainConfig cfg;
  cfg.max_epochs = 8;
  cfg.batch_size = 32;
  cfg.seed = 99;

  Model model(DenseNetConfig::desk_scale());
  model.init_params(cfg.seed);
  train(model, train_set, val_set, Target::kAfib, cfg);
  const auto eval1 = evaluate(model, test_set, Target::kAfib, 0.5, 32);
  const double gmean = eval1.metrics.gmean.value_or(0.0);

  // deterministic per seed: an identical rerun scores identically
  Model model2(DenseNetConfig::desk_scale());
  model2.init_params(cfg.seed);
  train(model2, train_set, val_set, Target::kAfib, cfg);
  const auto eval2 = evaluate(model2, test_set, Target::kAfib, 0.5, 32);
  expect(eval1.scores.size() == eval2.scores.size(), "score count changed between runs");
  for (std::size_t i = 0; i < eval1.scores.size(); ++i) {
    expect(eval1.scores[i].score == eval2.scores[i].score, "scores differ between reruns");
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  expect(gmean >= 0.95, "test G-mean " + std::to_string(gmean) + " < 0.95");
  expect(seconds < 900.0, "took " + format_seconds(seconds));

  char buf[128];
  std::snprintf(buf, sizeof(buf), "test G-mean %.4f at threshold 0.5 in %s (two identical runs)",
                gmean, format_seconds(seconds).c_str());
  return buf;
}

// ---------------------------------------------------------------------------
// Criterion 9: transfer property on a shifted domain.
// ---------------------------------------------------------------------------

std::string criterion_transfer() {
  const auto t0 = std::chrono::steady_clock::now();

  SynthSpec domain_a;
  domain_a.n_records = 5000;
  domain_a.prevalence = 0.5;
  domain_a.seed = 171717;
  domain_a.burst_freq_hz = 7.0;
  domain_a.burst_amplitude = 1.25;
  domain_a.frac_1000hz = 0.15;
  domain_a.frac_9s = 0.1;

  // Altered noise spectrum and burst frequency, with the burst weak enough
  // that 300 records rarely suffice from scratch.
  SynthSpec domain_b;
  domain_b.n_records = 300;
  domain_b.prevalence = 0.5;
  domain_b.seed = 282828;
  domain_b.burst_freq_hz = 10.0;
  domain_b.burst_amplitude = 0.35;
  domain_b.noise_rho = 0.55;
  domain_b.white_sigma = 0.3;
  domain_b.frac_1000hz = 0.15;
  domain_b.frac_9s = 0.1;

  InMemorySamples a_samples(synth_preprocessed(domain_a));
  const auto a_sets = split_80_20(a_samples.size(), 0.1, 21);
  SubsetSamples a_train(a_samples, a_sets.train), a_val(a_samples, a_sets.val);

  TrainConfig pre_cfg;
  pre_cfg.max_epochs = 5;
  pre_cfg.batch_size = 64;
  pre_cfg.seed = 31;

  Model pretrained(DenseNetConfig::desk_scale());
  pretrained.init_params(pre_cfg.seed);
  train(pretrained, a_train, a_val, Target::kAfib, pre_cfg);

  std::vector<std::vector<float>> pretrained_values;
  for (const auto& entry : pretrained.named_tensors()) {
    pretrained_values.push_back(entry.tensor->values());
  }
  const auto restore_pretrained = [&](Model& m) {
    auto tensors = m.named_tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      tensors[i].tensor->values() = pretrained_values[i];
    }
  };

  InMemorySamples b_samples(synth_preprocessed(domain_b));
  const auto b_sets = split_80_20(b_samples.size(), 0.2, 22);
  SubsetSamples b_train(b_samples, b_sets.train), b_val(b_samples, b_sets.val),
      b_test(b_samples, b_sets.test);

  const int epoch_budget = 12;
  int wins = 0;
  std::string detail;
  for (int seed = 1; seed <= 3; ++seed) {
    TrainConfig cfg;
    cfg.max_epochs = epoch_budget;
    cfg.batch_size = 24;
    cfg.seed = static_cast<std::uint64_t>(seed) * 101;

    // fine-tune the pretrained network with the winning setting (k=7)
    Model tuned(DenseNetConfig::desk_scale());
    restore_pretrained(tuned);
    finetune(tuned, b_train, b_val, Target::kAfib, 7, 0.003, cfg);
    const double tuned_gmean = gmean_at_half(tuned, b_test, Target::kAfib);

    // from-scratch baseline under the same epoch budget
    Model scratch(DenseNetConfig::desk_scale());
    scratch.init_params(cfg.seed);
    TrainConfig scratch_cfg = cfg;
    scratch_cfg.lr = 0.003;
    train(scratch, b_train, b_val, Target::kAfib, scratch_cfg);
    const double scratch_gmean = gmean_at_half(scratch, b_test, Target::kAfib);

    if (tuned_gmean >= scratch_gmean) ++wins;
    char buf[80];
    std::snprintf(buf, sizeof(buf), " seed%d: tuned %.3f vs scratch %.3f;", seed, tuned_gmean,
                  scratch_gmean);
    detail += buf;
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  expect(wins >= 2, "fine-tuning won only " + std::to_string(wins) + "/3 seeds:" + detail);
  expect(seconds < 1800.0, "took " + format_seconds(seconds));
  return std::to_string(wins) + "/3 seeds favor fine-tuning;" + detail + " " +
         format_seconds(seconds);
}

// ---------------------------------------------------------------------------
// Criterion 10 (optional): real PTB-XL, gated on ECGDNN_PTBXL_DIR.
// ---------------------------------------------------------------------------

std::string criterion_ptbxl(bool& skipped) {
  const char* dir = std::getenv("ECGDNN_PTBXL_DIR");
  if (dir == nullptr || *dir == '\0') {
    skipped = true;
    return "ECGDNN_PTBXL_DIR not set";
  }
  skipped = false;

  const fs::path root(dir);
  const auto metas = load_metadata_csv((root / "ptbxl_database.csv").string());
  expect(metas.size() == 21837,
         "expected 21837 raw records, found " + std::to_string(metas.size()));

  std::vector<WfdbHeader> headers;
  headers.reserve(metas.size());
  for (const auto& meta : metas) {
    auto header = parse_wfdb_header(read_text_file((root / (meta.path + ".hea")).string()));
    header.record_name = meta.record_id;
    headers.push_back(std::move(header));
  }
  auto filtered = filter_records(metas, headers);
  split_by_fold(filtered.manifest);

  std::vector<PreprocessedSample> kept;
  for (const auto& row : filtered.manifest.rows) {
    auto rec = read_wfdb_record((root / row.path).string());
    rec.record_id = row.record_id;
    auto outcome = run_pipeline(rec, row.labels);
    if (auto* sample = std::get_if<PreprocessedSample>(&outcome)) {
      kept.push_back(std::move(*sample));
    }
  }
  InMemorySamples all(std::move(kept));

  std::map<std::string, Split> split_of;
  for (const auto& row : filtered.manifest.rows) split_of[row.record_id] = row.split;
  std::vector<std::size_t> train_idx, val_idx, test_idx;
  for (std::size_t i = 0; i < all.size(); ++i) {
    switch (split_of.at(all.id(i))) {
      case Split::kTrain: train_idx.push_back(i); break;
      case Split::kVal: val_idx.push_back(i); break;
      case Split::kTest: test_idx.push_back(i); break;
    }
  }
  SubsetSamples train_set(all, train_idx), val_set(all, val_idx), test_set(all, test_idx);

  TrainConfig cfg;
  cfg.max_epochs = 40;
  cfg.batch_size = 64;
  cfg.seed = 1;
  Model model(DenseNetConfig::desk_scale());
  model.init_params(cfg.seed);
  train(model, train_set, val_set, Target::kAfib, cfg);

  // pick the operating point on validation scores, then measure on test
  auto val_scores = score_samples(model, val_set, Target::kAfib, 64);
  std::vector<double> vs;
  std::vector<bool> vl;
  for (const auto& row : val_scores) {
    vs.push_back(row.score);
    vl.push_back(row.label);
  }
  const double threshold = best_gmean_threshold(vs, vl);
  const auto result = evaluate(model, test_set, Target::kAfib, threshold, 64);
  const double gmean = result.metrics.gmean.value_or(0.0);
  expect(gmean >= 0.90, "AFIB best-threshold G-mean " + std::to_string(gmean));
  return "AFIB G-mean " + std::to_string(gmean) + " at threshold " + std::to_string(threshold);
}

struct Criterion {
  int id;
  const char* name;
  std::function<std::string()> fn;
  bool gating = true;
};

}  // namespace

int main(int argc, char** argv) {
  const unsigned hw = std::thread::hardware_concurrency();
  set_num_threads(hw > 1 ? static_cast<int>(hw) : 1);

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  bool ptbxl_skipped = false;
  const std::vector<Criterion> criteria = {
      {1, "metric-formula oracle vs published tables", criterion_metric_tables},
      {2, "gradient checks (primitives + model chain)", criterion_gradchecks},
      {3, "preprocessing suite", criterion_preprocessing},
      {4, "parser/serialization round trips", criterion_round_trips},
      {5, "protocol traces (plateau, early stop, best epoch)", criterion_protocol_traces},
      {6, "freezing contract under fine-tuning", criterion_freezing},
      {7, "subsampling oracle at published scale", criterion_subsampling},
      {8, "synthetic end-to-end learning", criterion_synthetic_learning},
      {9, "transfer vs from-scratch on a shifted domain", criterion_transfer},
      {10, "PTB-XL end-to-end (optional)",
       [&ptbxl_skipped] { return criterion_ptbxl(ptbxl_skipped); }, false},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    if (!selected.empty() && !selected.count(criterion.id)) continue;
    ptbxl_skipped = false;
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool passed = true;
    try {
      detail = criterion.fn();
    } catch (const CheckFailure& failure) {
      passed = false;
      detail = failure.message;
    } catch (const std::exception& e) {
      passed = false;
      detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* verdict = passed ? (ptbxl_skipped ? "SKIP" : "PASS") : "FAIL";
    std::printf("[%s] criterion %2d: %s (%s) - %s\n", verdict, criterion.id, criterion.name,
                format_seconds(seconds).c_str(), detail.c_str());
    std::fflush(stdout);
    if (!passed && criterion.gating) ++failures;
  }
  if (failures > 0) {
    std::printf("%d gating criterion(s) failed\n", failures);
    return 1;
  }
  return 0;
}
