#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecgdnn/cache.hpp"
#include "ecgdnn/manifest.hpp"
#include "ecgdnn/train.hpp"

namespace ecgdnn {

/// Stratified k-fold assignment. Positives and negatives for the target are
/// shuffled separately (seeded) and dealt round-robin, so per-fold positive
/// counts differ by at most one. Returns a fold index in [0, k) per row.
/// Throws TooFewPositives when there are fewer positives than folds.
std::vector<int> stratified_kfold(const DatasetManifest& manifest, int k, Target target,
                                  std::uint64_t seed);

/// Same, keyed by a label vector (used for cache-backed sample sets).
std::vector<int> stratified_kfold_labels(const std::vector<bool>& labels, int k,
                                         std::uint64_t seed);

/// Half-size subsample preserving label-pattern proportions: rows are
/// grouped by their full 7-flag pattern, each group contributes half
/// (largest-remainder rounding toward the floor(n/2) total), and members
/// are picked by seeded shuffle. With non-overlapping patterns every class
/// keeps its positive count within one of the exact half.
DatasetManifest stratified_halve(const DatasetManifest& manifest, std::uint64_t seed);

struct GridSpec {
  std::vector<double> lrs{0.003};
  std::vector<double> factors{0.8};
  std::vector<int> frozen_blocks{0};  // 0 = train from scratch
  int repeats = 15;

  void validate() const;  // throws ConfigError on empty option lists
  std::size_t num_cells() const {
    return lrs.size() * factors.size() * frozen_blocks.size();
  }
};

enum class GridProtocol { kCrossVal, kHoldout };

struct GridCell {
  double lr = 0.0;
  double factor = 0.0;
  int frozen = 0;
};

struct GridRun {
  GridCell cell;
  std::size_t cell_index = 0;
  int repeat = 0;
  bool failed = false;
  std::string error;
  double metric = 0.0;  // validation G-mean at threshold 0.5
  int best_epoch = 0;
};

struct GridCellSummary {
  GridCell cell;
  std::size_t cell_index = 0;
  double mean_metric = 0.0;
  double std_metric = 0.0;
  int completed = 0;
  int failed = 0;
};

struct GridSearchResult {
  std::vector<GridRun> runs;
  std::vector<GridCellSummary> ranked;  // best mean metric first
};

/// Exhaustive grid x repeats. Each run derives its own seed from the base
/// config's seed, the cell index and the repeat, so cells can run in any
/// order (or concurrently) with identical results. Cross-validation
/// protocol: 5 stratified folds over `data`, metric averaged over folds.
/// Holdout protocol: `data` is the train set and `holdout_val` the fixed
/// validation set. Cells with frozen_blocks > 0 fine-tune from `pretrained`
/// (required in that case). Failed runs are recorded and skipped in the
/// aggregation.
GridSearchResult grid_search(const DenseNetConfig& model_cfg, const SampleSource& data,
                             const SampleSource* holdout_val, Target target,
                             const TrainConfig& base_cfg, const GridSpec& grid,
                             GridProtocol protocol, Model* pretrained,
                             int cv_folds = 5);

/// Grid-search report CSV: lr, factor, frozen, repeat, metric, best_epoch.
void write_grid_report_csv(const GridSearchResult& result, const std::string& path);

}  // namespace ecgdnn
