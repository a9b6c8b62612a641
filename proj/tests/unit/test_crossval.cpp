#include <doctest.h>

#include <cmath>
#include <set>

#include "ecgdnn/crossval.hpp"
#include "ecgdnn/errors.hpp"
#include "ecgdnn/prng.hpp"

using namespace ecgdnn;

namespace {

DatasetManifest labeled_manifest(const std::vector<std::pair<Target, int>>& counts,
                                 int unlabeled) {
  DatasetManifest manifest;
  int id = 0;
  for (const auto& [target, n] : counts) {
    for (int i = 0; i < n; ++i) {
      ManifestRow row;
      row.record_id = "r" + std::to_string(id++);
      row.labels.set(target, true);
      manifest.rows.push_back(row);
    }
  }
  for (int i = 0; i < unlabeled; ++i) {
    ManifestRow row;
    row.record_id = "r" + std::to_string(id++);
    manifest.rows.push_back(row);
  }
  return manifest;
}

}  // namespace

TEST_SUITE("crossval") {

TEST_CASE("stratified folds balance positives") {
  auto manifest = labeled_manifest({{Target::kAfib, 10}}, 90);
  const auto folds = stratified_kfold(manifest, 5, Target::kAfib, 123);
  REQUIRE(folds.size() == 100);

  int pos_per_fold[5] = {}, per_fold[5] = {};
  for (std::size_t i = 0; i < folds.size(); ++i) {
    ++per_fold[folds[i]];
    if (manifest.rows[i].labels.get(Target::kAfib)) ++pos_per_fold[folds[i]];
  }
  for (int f = 0; f < 5; ++f) {
    CHECK(pos_per_fold[f] == 2);  // 10 positives over 5 folds, exactly
    CHECK(per_fold[f] == 20);
  }

  // partition + seed stability
  CHECK(stratified_kfold(manifest, 5, Target::kAfib, 123) == folds);
  CHECK(stratified_kfold(manifest, 5, Target::kAfib, 124) != folds);
}

TEST_CASE("uneven positives differ by at most one per fold") {
  auto manifest = labeled_manifest({{Target::kPvc, 13}}, 50);
  const auto folds = stratified_kfold(manifest, 5, Target::kPvc, 9);
  int pos_per_fold[5] = {};
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if (manifest.rows[i].labels.get(Target::kPvc)) ++pos_per_fold[folds[i]];
  }
  const auto [lo, hi] = std::minmax_element(std::begin(pos_per_fold), std::end(pos_per_fold));
  CHECK(*hi - *lo <= 1);
}

TEST_CASE("too few positives is an error") {
  auto manifest = labeled_manifest({{Target::kLbbb, 3}}, 40);
  CHECK_THROWS_AS(stratified_kfold(manifest, 5, Target::kLbbb, 1), TooFewPositives);
}

TEST_CASE("halving preserves size and per-class counts") {
  auto manifest = labeled_manifest(
      {{Target::kAfib, 27}, {Target::kPvc, 14}, {Target::kLbbb, 9}}, 150);
  const std::size_t n = manifest.rows.size();
  const auto half = stratified_halve(manifest, 42);
  CHECK(half.rows.size() == n / 2);

  for (Target t : {Target::kAfib, Target::kPvc, Target::kLbbb}) {
    const double exact = static_cast<double>(manifest.count_positive(t)) / 2.0;
    CHECK(std::abs(static_cast<double>(half.count_positive(t)) - exact) <= 1.0);
  }

  // halving twice gives a quarter within one
  const auto quarter = stratified_halve(half, 43);
  CHECK(std::abs(static_cast<double>(quarter.rows.size()) -
                 static_cast<double>(n) / 4.0) <= 1.0);

  // seeded and deterministic
  const auto again = stratified_halve(manifest, 42);
  REQUIRE(again.rows.size() == half.rows.size());
  for (std::size_t i = 0; i < half.rows.size(); ++i) {
    CHECK(again.rows[i].record_id == half.rows[i].record_id);
  }
  const auto other_seed = stratified_halve(manifest, 7);
  bool any_diff = other_seed.rows.size() != half.rows.size();
  for (std::size_t i = 0; !any_diff && i < half.rows.size(); ++i) {
    any_diff = other_seed.rows[i].record_id != half.rows[i].record_id;
  }
  CHECK(any_diff);
}

TEST_CASE("halved rows are a subset in manifest order") {
  auto manifest = labeled_manifest({{Target::kStach, 8}}, 20);
  const auto half = stratified_halve(manifest, 3);
  std::set<std::string> ids;
  for (const auto& row : manifest.rows) ids.insert(row.record_id);
  std::string prev;
  for (const auto& row : half.rows) {
    CHECK(ids.count(row.record_id) == 1);
    CHECK(row.record_id != prev);
    prev = row.record_id;
  }
}

TEST_CASE("grid search shape, determinism and failure isolation") {
  // Tiny separable data, tiny model: exercised via the holdout protocol.
  DenseNetConfig cfg;
  cfg.init_channels = 8;
  cfg.growth_rate = 4;
  cfg.block_layers = {1, 1, 1, 1};
  cfg.bn_size = 2;
  cfg.input_leads = 2;
  cfg.input_len = 160;
  cfg.preset = "custom";

  VectorSamples data(2, 160);
  Prng rng(5);
  for (int i = 0; i < 40; ++i) {
    const bool positive = i % 2 == 0;
    std::vector<float> tensor(2 * 160);
    for (auto& v : tensor) v = static_cast<float>(0.3 * rng.normal());
    if (positive) {
      for (int t = 0; t < 160; ++t) {
        tensor[t] += static_cast<float>(std::sin(2.0 * M_PI * 8.0 * t / 160.0));
      }
    }
    LabelSet labels;
    labels.set(Target::kAfib, positive);
    data.add("g" + std::to_string(i), std::move(tensor), labels);
  }
  VectorSamples val(2, 160);
  Prng rng2(6);
  for (int i = 0; i < 16; ++i) {
    const bool positive = i % 2 == 0;
    std::vector<float> tensor(2 * 160);
    for (auto& v : tensor) v = static_cast<float>(0.3 * rng2.normal());
    if (positive) {
      for (int t = 0; t < 160; ++t) {
        tensor[t] += static_cast<float>(std::sin(2.0 * M_PI * 8.0 * t / 160.0));
      }
    }
    LabelSet labels;
    labels.set(Target::kAfib, positive);
    val.add("v" + std::to_string(i), std::move(tensor), labels);
  }

  TrainConfig base;
  base.max_epochs = 2;
  base.batch_size = 8;
  base.seed = 99;

  SUBCASE("1x1 grid with 2 repeats runs twice") {
    GridSpec grid;
    grid.lrs = {0.003};
    grid.factors = {0.8};
    grid.frozen_blocks = {0};
    grid.repeats = 2;
    const auto result =
        grid_search(cfg, data, &val, Target::kAfib, base, grid, GridProtocol::kHoldout,
                    nullptr);
    CHECK(result.runs.size() == 2);
    REQUIRE(result.ranked.size() == 1);
    CHECK(result.ranked[0].completed == 2);

    const auto rerun =
        grid_search(cfg, data, &val, Target::kAfib, base, grid, GridProtocol::kHoldout,
                    nullptr);
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
      CHECK(rerun.runs[i].metric == result.runs[i].metric);
    }
  }

  SUBCASE("fine-tune grid enumerates 3 frozen x 3 lr cells") {
    Model pretrained(cfg);
    pretrained.init_params(123);

    GridSpec grid;
    grid.lrs = {0.001, 0.002, 0.003};
    grid.factors = {0.8};
    grid.frozen_blocks = {5, 7, 9};
    grid.repeats = 1;
    const auto result =
        grid_search(cfg, data, &val, Target::kAfib, base, grid, GridProtocol::kHoldout,
                    &pretrained);
    CHECK(result.runs.size() == 9);
    CHECK(result.ranked.size() == 9);
    std::set<std::pair<int, double>> seen;
    for (const auto& run : result.runs) {
      seen.insert({run.cell.frozen, run.cell.lr});
      CHECK_FALSE(run.failed);
    }
    CHECK(seen.size() == 9);
  }

  SUBCASE("cells failing are marked and do not abort the grid") {
    GridSpec grid;
    grid.lrs = {0.003};
    grid.factors = {0.8};
    grid.frozen_blocks = {0, 7};  // 7 needs a pretrained model: fails
    grid.repeats = 1;
    const auto result =
        grid_search(cfg, data, &val, Target::kAfib, base, grid, GridProtocol::kHoldout,
                    nullptr);
    int failed = 0, ok = 0;
    for (const auto& run : result.runs) run.failed ? ++failed : ++ok;
    CHECK(failed == 1);
    CHECK(ok == 1);
  }

  SUBCASE("cross-validation protocol partitions into folds") {
    GridSpec grid;
    grid.lrs = {0.003};
    grid.factors = {0.8};
    grid.frozen_blocks = {0};
    grid.repeats = 1;
    TrainConfig fast = base;
    fast.max_epochs = 1;
    const auto result = grid_search(cfg, data, nullptr, Target::kAfib, fast, grid,
                                    GridProtocol::kCrossVal, nullptr, 5);
    CHECK(result.runs.size() == 1);
    CHECK_FALSE(result.runs[0].failed);
    CHECK(result.runs[0].metric >= 0.0);
  }
}

}  // TEST_SUITE
