// Microbenchmarks for the training-time hot paths and the signal pipeline.

#include <benchmark/benchmark.h>

#include <cmath>

#include "ecgdnn/densenet.hpp"
#include "ecgdnn/evaluate.hpp"
#include "ecgdnn/metrics.hpp"
#include "ecgdnn/parallel.hpp"
#include "ecgdnn/preprocess.hpp"
#include "ecgdnn/prng.hpp"
#include "ecgdnn/synth.hpp"
#include "ecgdnn/tensor.hpp"
#include "ecgdnn/train.hpp"

using namespace ecgdnn;

namespace {

Tensor<float> random_tensor(Shape shape, std::uint64_t seed) {
  Tensor<float> t = Tensor<float>::zeros(std::move(shape));
  Prng rng(seed);
  for (auto& v : t.values()) v = static_cast<float>(rng.normal());
  return t;
}

void BM_Conv1dForward(benchmark::State& state) {
  set_num_threads(static_cast<int>(state.range(0)));
  auto x = random_tensor({8, 12, 5000}, 1);
  auto w = random_tensor({16, 12, 7}, 2);
  Tensor<float> none;
  for (auto _ : state) {
    auto y = conv1d(x, w, none, 2, 3, static_cast<Tape<float>*>(nullptr));
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * 8);
  set_num_threads(1);
}
BENCHMARK(BM_Conv1dForward)->Arg(1)->Arg(2);

void BM_Conv1dTrainStep(benchmark::State& state) {
  set_num_threads(static_cast<int>(state.range(0)));
  auto x = random_tensor({8, 12, 5000}, 1);
  auto w = random_tensor({16, 12, 7}, 2);
  w.set_requires_grad(true);
  auto labels = Tensor<float>::zeros({8, 1});
  for (auto _ : state) {
    w.zero_grad();
    Tape<float> tape;
    auto y = conv1d(x, w, Tensor<float>(), 2, 3, &tape);
    auto p = adaptive_avg_pool1d(y, &tape);
    auto flat = reshape(p, {8, 16}, &tape);
    auto lw = random_tensor({1, 16}, 3);
    auto out = linear(flat, lw, Tensor<float>(), &tape);
    auto loss = bce_with_logits(out, labels, 1.0, &tape);
    tape.backward(loss);
    benchmark::DoNotOptimize(w.grad_data());
  }
  set_num_threads(1);
}
BENCHMARK(BM_Conv1dTrainStep)->Arg(1)->Arg(2);

void BM_BatchNormForward(benchmark::State& state) {
  auto x = random_tensor({8, 32, 1250}, 4);
  auto gamma = random_tensor({32}, 5);
  auto beta = random_tensor({32}, 6);
  auto rm = Tensor<float>::zeros({32});
  auto rv = random_tensor({32}, 7);
  for (auto& v : rv.values()) v = std::abs(v) + 0.5f;
  for (auto _ : state) {
    auto y = batchnorm1d(x, gamma, beta, rm, rv, BatchNormMode::kTrain, 0.1, 1e-5,
                         static_cast<Tape<float>*>(nullptr));
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_BatchNormForward);

void BM_DeskForwardEval(benchmark::State& state) {
  set_num_threads(static_cast<int>(state.range(0)));
  Model model(DenseNetConfig::desk_scale());
  model.init_params(1);
  auto x = random_tensor({8, 12, 5000}, 8);
  for (auto _ : state) {
    auto y = model.forward(x, BatchNormMode::kEval, nullptr);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * 8);
  set_num_threads(1);
}
BENCHMARK(BM_DeskForwardEval)->Arg(1)->Arg(2);

void BM_DeskTrainStep(benchmark::State& state) {
  set_num_threads(static_cast<int>(state.range(0)));
  Model model(DenseNetConfig::desk_scale());
  model.init_params(1);
  AdamOptimizer<float> opt(model.trainable_params());
  auto x = random_tensor({8, 12, 5000}, 9);
  auto labels = Tensor<float>::zeros({8, 1});
  for (int i = 0; i < 8; i += 2) labels.data()[i] = 1.0f;
  for (auto _ : state) {
    Tape<float> tape;
    auto logits = model.forward(x, BatchNormMode::kTrain, &tape);
    auto loss = bce_with_logits(logits, labels, 1.0, &tape);
    opt.zero_grad();
    tape.backward(loss);
    opt.step(0.003);
    benchmark::DoNotOptimize(loss.data());
  }
  state.SetItemsProcessed(state.iterations() * 8);
  set_num_threads(1);
}
BENCHMARK(BM_DeskTrainStep)->Arg(1)->Arg(2);

void BM_Resample1000To500(benchmark::State& state) {
  Prng rng(10);
  std::vector<double> lead(10000);
  for (auto& v : lead) v = rng.normal();
  for (auto _ : state) {
    auto out = resample_to_500(lead, 1000.0);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Resample1000To500);

void BM_PipelineRecord(benchmark::State& state) {
  SynthSpec spec;
  spec.seed = 11;
  spec.frac_1000hz = 1.0;  // worst case: every lead resampled
  const auto rec = synth_record(spec, 0);
  for (auto _ : state) {
    auto out = run_pipeline(rec.record, LabelSet{});
    benchmark::DoNotOptimize(&out);
  }
}
BENCHMARK(BM_PipelineRecord);

void BM_ZscoreLead(benchmark::State& state) {
  Prng rng(12);
  std::vector<double> lead(5000);
  for (auto& v : lead) v = rng.normal();
  for (auto _ : state) {
    auto out = zscore_lead(lead);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_ZscoreLead);

void BM_ThresholdSweep(benchmark::State& state) {
  Prng rng(13);
  std::vector<double> scores(100000);
  std::vector<bool> labels(100000);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.uniform();
    labels[i] = rng.uniform() < 0.1;
  }
  for (auto _ : state) {
    auto curve = sweep(scores, labels, 200);
    benchmark::DoNotOptimize(curve.data());
  }
}
BENCHMARK(BM_ThresholdSweep);

void BM_AdamStep(benchmark::State& state) {
  Model model(DenseNetConfig::desk_scale());
  model.init_params(1);
  AdamOptimizer<float> opt(model.trainable_params());
  for (auto* p : opt.params()) {
    Prng rng(14);
    for (auto& g : p->values()) g = static_cast<float>(rng.normal());
    p->grad_data();  // allocate
  }
  for (auto _ : state) {
    opt.step(0.003);
  }
}
BENCHMARK(BM_AdamStep);

}  // namespace

BENCHMARK_MAIN();
