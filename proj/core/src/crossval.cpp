#include "ecgdnn/crossval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "ecgdnn/csv.hpp"
#include "ecgdnn/errors.hpp"
#include "ecgdnn/evaluate.hpp"
#include "ecgdnn/prng.hpp"

namespace ecgdnn {

std::vector<int> stratified_kfold_labels(const std::vector<bool>& labels, int k,
                                         std::uint64_t seed) {
  if (k < 2) throw ConfigError("stratified_kfold needs k >= 2");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] ? pos : neg).push_back(i);
  }
  if (pos.size() < static_cast<std::size_t>(k)) {
    throw TooFewPositives("need at least " + std::to_string(k) + " positives, have " +
                          std::to_string(pos.size()));
  }
  Prng rng(seed);
  rng.shuffle(pos);
  rng.shuffle(neg);

  std::vector<int> folds(labels.size(), 0);
  for (std::size_t i = 0; i < pos.size(); ++i) folds[pos[i]] = static_cast<int>(i % k);
  for (std::size_t i = 0; i < neg.size(); ++i) folds[neg[i]] = static_cast<int>(i % k);
  return folds;
}

std::vector<int> stratified_kfold(const DatasetManifest& manifest, int k, Target target,
                                  std::uint64_t seed) {
  std::vector<bool> labels;
  labels.reserve(manifest.rows.size());
  for (const auto& row : manifest.rows) labels.push_back(row.labels.get(target));
  return stratified_kfold_labels(labels, k, seed);
}

DatasetManifest stratified_halve(const DatasetManifest& manifest, std::uint64_t seed) {
  const std::size_t n = manifest.rows.size();
  const std::size_t target_total = n / 2;

  // Group rows by their full label pattern.
  std::map<std::uint32_t, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t key = 0;
    for (std::size_t t = 0; t < kNumTargets; ++t) {
      if (manifest.rows[i].labels.get(static_cast<Target>(t))) key |= 1u << t;
    }
    strata[key].push_back(i);
  }

  // Per-stratum quota: floor(n_s/2), with the shortfall toward target_total
  // granted to the largest odd strata (deterministic order).
  std::size_t base_total = 0;
  std::vector<std::pair<std::uint32_t, std::size_t>> odd;  // (key, size)
  for (const auto& [key, members] : strata) {
    base_total += members.size() / 2;
    if (members.size() % 2 == 1) odd.emplace_back(key, members.size());
  }
  std::sort(odd.begin(), odd.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::size_t extra = target_total > base_total ? target_total - base_total : 0;

  std::map<std::uint32_t, std::size_t> quota;
  for (const auto& [key, members] : strata) quota[key] = members.size() / 2;
  for (std::size_t i = 0; i < odd.size() && extra > 0; ++i, --extra) {
    quota[odd[i].first] += 1;
  }

  Prng rng(seed);
  std::vector<std::size_t> picked;
  picked.reserve(target_total);
  for (auto& [key, members] : strata) {
    rng.shuffle(members);
    for (std::size_t i = 0; i < quota[key]; ++i) picked.push_back(members[i]);
  }
  std::sort(picked.begin(), picked.end());  // keep manifest order

  DatasetManifest out;
  out.provenance = manifest.provenance.empty()
                       ? "stratified half"
                       : manifest.provenance + "; stratified half";
  out.rows.reserve(picked.size());
  for (std::size_t idx : picked) out.rows.push_back(manifest.rows[idx]);
  return out;
}

void GridSpec::validate() const {
  if (lrs.empty() || factors.empty() || frozen_blocks.empty()) {
    throw ConfigError("grid option lists must be non-empty");
  }
  if (repeats < 1) throw ConfigError("grid repeats must be >= 1");
}

namespace {

double run_metric(Model& model, const SampleSource& val, Target target) {
  const auto result = evaluate(model, val, target, 0.5);
  return result.metrics.gmean.value_or(0.0);
}

// One training run for a cell: returns (metric, best_epoch).
std::pair<double, int> run_cell(const DenseNetConfig& model_cfg, const SampleSource& train_set,
                                const SampleSource& val_set, Target target, TrainConfig cfg,
                                const GridCell& cell, Model* pretrained) {
  cfg.lr = cell.lr;
  cfg.plateau_factor = cell.factor;
  if (cell.frozen > 0) {
    if (!pretrained) throw ConfigError("frozen_blocks > 0 needs a pretrained checkpoint");
    // Work on a private copy of the pretrained weights.
    Model model(pretrained->config());
    auto src = pretrained->named_tensors();
    auto dst = model.named_tensors();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i].tensor->values() = src[i].tensor->values();
    model.seed = pretrained->seed;
    const auto history = finetune(model, train_set, val_set, target, cell.frozen, cell.lr, cfg);
    return {run_metric(model, val_set, target), history.best_epoch};
  }
  Model model(model_cfg);
  model.init_params(cfg.seed);
  const auto history = train(model, train_set, val_set, target, cfg);
  return {run_metric(model, val_set, target), history.best_epoch};
}

}  // namespace

GridSearchResult grid_search(const DenseNetConfig& model_cfg, const SampleSource& data,
                             const SampleSource* holdout_val, Target target,
                             const TrainConfig& base_cfg, const GridSpec& grid,
                             GridProtocol protocol, Model* pretrained, int cv_folds) {
  grid.validate();
  if (protocol == GridProtocol::kHoldout && holdout_val == nullptr) {
    throw ConfigError("holdout protocol needs a validation set");
  }

  std::vector<GridCell> cells;
  for (int frozen : grid.frozen_blocks) {
    for (double lr : grid.lrs) {
      for (double factor : grid.factors) {
        cells.push_back({lr, factor, frozen});
      }
    }
  }

  GridSearchResult result;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    for (int repeat = 0; repeat < grid.repeats; ++repeat) {
      GridRun run;
      run.cell = cells[ci];
      run.cell_index = ci;
      run.repeat = repeat;
      TrainConfig cfg = base_cfg;
      cfg.seed = Prng::derive_seed(base_cfg.seed,
                                   ci * static_cast<std::size_t>(grid.repeats) +
                                       static_cast<std::size_t>(repeat));
      try {
        if (protocol == GridProtocol::kCrossVal) {
          std::vector<bool> labels;
          labels.reserve(data.size());
          for (std::size_t i = 0; i < data.size(); ++i) {
            labels.push_back(data.labels(i).get(target));
          }
          const auto folds = stratified_kfold_labels(labels, cv_folds, cfg.seed);
          double metric_sum = 0.0;
          int best_epoch_last = 0;
          for (int f = 0; f < cv_folds; ++f) {
            std::vector<std::size_t> train_idx, val_idx;
            for (std::size_t i = 0; i < data.size(); ++i) {
              (folds[i] == f ? val_idx : train_idx).push_back(i);
            }
            SubsetSamples train_set(data, std::move(train_idx));
            SubsetSamples val_set(data, std::move(val_idx));
            const auto [metric, best_epoch] =
                run_cell(model_cfg, train_set, val_set, target, cfg, cells[ci], pretrained);
            metric_sum += metric;
            best_epoch_last = best_epoch;
          }
          run.metric = metric_sum / static_cast<double>(cv_folds);
          run.best_epoch = best_epoch_last;
        } else {
          const auto [metric, best_epoch] =
              run_cell(model_cfg, data, *holdout_val, target, cfg, cells[ci], pretrained);
          run.metric = metric;
          run.best_epoch = best_epoch;
        }
      } catch (const std::exception& e) {
        run.failed = true;
        run.error = e.what();
      }
      result.runs.push_back(std::move(run));
    }
  }

  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    GridCellSummary summary;
    summary.cell = cells[ci];
    summary.cell_index = ci;
    double sum = 0.0, sumsq = 0.0;
    for (const auto& run : result.runs) {
      if (run.cell_index != ci) continue;
      if (run.failed) {
        ++summary.failed;
        continue;
      }
      sum += run.metric;
      sumsq += run.metric * run.metric;
      ++summary.completed;
    }
    if (summary.completed > 0) {
      const double n = static_cast<double>(summary.completed);
      summary.mean_metric = sum / n;
      const double var = std::max(0.0, sumsq / n - summary.mean_metric * summary.mean_metric);
      summary.std_metric = std::sqrt(var);
    }
    result.ranked.push_back(summary);
  }
  std::sort(result.ranked.begin(), result.ranked.end(),
            [](const GridCellSummary& a, const GridCellSummary& b) {
              if (a.mean_metric != b.mean_metric) return a.mean_metric > b.mean_metric;
              if (a.failed != b.failed) return a.failed < b.failed;
              return a.cell_index < b.cell_index;
            });
  return result;
}

void write_grid_report_csv(const GridSearchResult& result, const std::string& path) {
  std::string out = "lr,factor,frozen,repeat,failed,metric,best_epoch\n";
  char buf[160];
  for (const auto& run : result.runs) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%d,%d,%d,%.9g,%d\n", run.cell.lr,
                  run.cell.factor, run.cell.frozen, run.repeat, run.failed ? 1 : 0, run.metric,
                  run.best_epoch);
    out += buf;
  }
  write_text_file(path, out);
}

}  // namespace ecgdnn
