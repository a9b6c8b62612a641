// ecgdnn command-line front end.
//
// Exit codes: 0 ok, 1 usage, 2 configuration, 3 data, 4 numeric abort.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecgdnn/cache.hpp"
#include "ecgdnn/checkpoint.hpp"
#include "ecgdnn/crossval.hpp"
#include "ecgdnn/csv.hpp"
#include "ecgdnn/errors.hpp"
#include "ecgdnn/evaluate.hpp"
#include "ecgdnn/manifest.hpp"
#include "ecgdnn/metadata.hpp"
#include "ecgdnn/parallel.hpp"
#include "ecgdnn/preprocess.hpp"
#include "ecgdnn/runconfig.hpp"
#include "ecgdnn/synth.hpp"
#include "ecgdnn/train.hpp"
#include "ecgdnn/wfdb.hpp"

namespace fs = std::filesystem;
using namespace ecgdnn;

namespace {

const std::vector<std::string> kKnownConfigKeys = {
    "dataset.metadata", "dataset.records_dir", "dataset.manifest", "dataset.cache",
    "pipeline.fir_taps", "pipeline.fir_cutoff", "pipeline.zscore_epsilon",
    "pipeline.flat_tolerance",
    "model.preset",
    "training.lr", "training.plateau_factor", "training.plateau_patience",
    "training.max_epochs", "training.early_stop_patience", "training.batch_size",
    "training.seed", "training.pos_weight", "training.threads",
    "evaluation.threshold",
    "grid.lrs", "grid.factors", "grid.frozen", "grid.repeats", "grid.protocol",
    "synth.records", "synth.prevalence", "synth.seed", "synth.target",
    "synth.burst_freq", "synth.burst_amplitude", "synth.noise_rho",
    "synth.frac_1000hz", "synth.frac_9s", "synth.frac_underage", "synth.frac_flat",
    "synth.frac_short",
};

RunConfig load_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  RunConfig cfg = RunConfig::load(path);
  cfg.require_known_keys(kKnownConfigKeys);
  return cfg;
}

void print_run_header(const std::string& command, std::uint64_t seed) {
  std::cerr << "# ecgdnn " << command << " seed=" << seed << " threads=" << num_threads()
            << "\n";
}

Target parse_target(const std::string& name) { return target_from_name(name); }

DenseNetConfig model_config_from(const std::string& preset) {
  if (preset == "paper_default") return DenseNetConfig::paper_default();
  if (preset == "desk_scale") return DenseNetConfig::desk_scale();
  throw ConfigError("unknown model preset: " + preset + " (paper_default or desk_scale)");
}

TrainConfig train_config_from(const RunConfig& cfg) {
  TrainConfig tc;
  tc.lr = cfg.get_double("training.lr", tc.lr);
  tc.plateau_factor = cfg.get_double("training.plateau_factor", tc.plateau_factor);
  tc.plateau_patience = cfg.get_int("training.plateau_patience", tc.plateau_patience);
  tc.max_epochs = cfg.get_int("training.max_epochs", tc.max_epochs);
  tc.early_stop_patience = cfg.get_int("training.early_stop_patience", tc.early_stop_patience);
  tc.batch_size = cfg.get_int("training.batch_size", tc.batch_size);
  tc.seed = cfg.get_u64("training.seed", tc.seed);
  const std::string pw = cfg.get_string("training.pos_weight", "auto");
  if (pw != "auto") tc.pos_weight = cfg.get_double("training.pos_weight", 1.0);
  return tc;
}

// Cache indices belonging to one manifest split, in cache order.
std::vector<std::size_t> split_indices(const CacheSamples& cache,
                                       const DatasetManifest& manifest, Split split) {
  std::map<std::string, Split> by_id;
  for (const auto& row : manifest.rows) by_id[row.record_id] = row.split;
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < cache.size(); ++i) {
    const auto it = by_id.find(cache.id(i));
    if (it != by_id.end() && it->second == split) indices.push_back(i);
  }
  return indices;
}

void write_metrics_csv(const std::map<Target, MetricSet>& per_target,
                       const std::map<Target, ConfusionMatrix>& cms, const std::string& path) {
  std::string out = "target,threshold,sensitivity,specificity,gmean,f2,tp,fp,fn,tn\n";
  char buf[256];
  const auto fmt = [](const std::optional<double>& v) {
    if (!v) return std::string("");
    char b[32];
    std::snprintf(b, sizeof(b), "%.9g", *v);
    return std::string(b);
  };
  for (const auto& [target, m] : per_target) {
    const auto& cm = cms.at(target);
    std::snprintf(buf, sizeof(buf), "%s,%.9g,%s,%s,%s,%s,%lld,%lld,%lld,%lld\n",
                  std::string(target_name(target)).c_str(), m.threshold,
                  fmt(m.sensitivity).c_str(), fmt(m.specificity).c_str(),
                  fmt(m.gmean).c_str(), fmt(m.f2).c_str(), static_cast<long long>(cm.tp),
                  static_cast<long long>(cm.fp), static_cast<long long>(cm.fn),
                  static_cast<long long>(cm.tn));
    out += buf;
  }
  write_text_file(path, out);
}

int cmd_ingest(const std::string& metadata_path, const std::string& records_dir,
               const std::string& out_path) {
  print_run_header("ingest", 0);
  const auto metas = load_metadata_csv(metadata_path);

  std::vector<WfdbHeader> headers;
  std::size_t unreadable = 0;
  headers.reserve(metas.size());
  for (const auto& meta : metas) {
    const std::string rel = meta.path.empty() ? meta.record_id : meta.path;
    const fs::path hea = fs::path(records_dir) / (rel + ".hea");
    try {
      auto header = parse_wfdb_header(read_text_file(hea.string()));
      header.record_name = meta.record_id;  // join key; .hea names can differ
      headers.push_back(std::move(header));
    } catch (const Error& e) {
      ++unreadable;
      std::cerr << "skipping " << meta.record_id << ": " << e.what() << "\n";
    }
  }

  auto result = filter_records(metas, headers);
  result.manifest.provenance = "ingested from " + metadata_path;
  write_manifest_csv(result.manifest, out_path);

  std::map<std::string, std::size_t> tally;
  for (const auto& entry : result.rejected) {
    ++tally[std::string(filter_reason_name(entry.reason))];
  }
  std::cerr << "ingested " << result.manifest.rows.size() << " of " << metas.size()
            << " records";
  if (unreadable) std::cerr << " (" << unreadable << " unreadable)";
  for (const auto& [reason, count] : tally) std::cerr << ", " << reason << " " << count;
  std::cerr << "\n";
  for (Target t : kAllTargets) {
    std::cerr << "  " << target_name(t) << ": " << result.manifest.count_positive(t) << "\n";
  }
  return 0;
}

int cmd_preprocess(const std::string& manifest_path, const std::string& records_dir,
                   const std::string& out_path, const RunConfig& cfg) {
  print_run_header("preprocess", 0);
  const auto manifest = read_manifest_csv(manifest_path);

  PipelineConfig pipeline;
  pipeline.fir_taps = cfg.get_int("pipeline.fir_taps", pipeline.fir_taps);
  pipeline.fir_cutoff = cfg.get_double("pipeline.fir_cutoff", pipeline.fir_cutoff);
  pipeline.zscore_epsilon = cfg.get_double("pipeline.zscore_epsilon", pipeline.zscore_epsilon);
  pipeline.flat_tolerance = cfg.get_double("pipeline.flat_tolerance", pipeline.flat_tolerance);

  CacheWriter writer(out_path);
  std::size_t accepted = 0;
  std::map<std::string, std::size_t> rejected;
  for (const auto& row : manifest.rows) {
    const fs::path rec_path = fs::path(records_dir) / row.path;
    PhysicalRecord rec = read_wfdb_record(rec_path.string());
    rec.record_id = row.record_id;
    auto outcome = run_pipeline(rec, row.labels, pipeline);
    if (auto* sample = std::get_if<PreprocessedSample>(&outcome)) {
      writer.append(*sample);
      ++accepted;
    } else {
      ++rejected[std::string(reject_reason_name(std::get<Rejection>(outcome).reason))];
    }
  }
  writer.close();
  std::cerr << "preprocessed " << accepted << " of " << manifest.rows.size() << " records";
  for (const auto& [reason, count] : rejected) std::cerr << ", " << reason << " " << count;
  std::cerr << "\n";
  return 0;
}

int cmd_split(const std::string& manifest_path, int test_fold, int val_fold,
              const std::string& out_path) {
  print_run_header("split", 0);
  auto manifest = read_manifest_csv(manifest_path);
  split_by_fold(manifest, test_fold, val_fold);
  write_manifest_csv(manifest, out_path.empty() ? manifest_path : out_path);
  std::size_t train = 0, val = 0, test = 0;
  for (const auto& row : manifest.rows) {
    if (row.split == Split::kTrain) ++train;
    else if (row.split == Split::kVal) ++val;
    else ++test;
  }
  std::cerr << "split: train " << train << ", val " << val << ", test " << test << "\n";
  return 0;
}

int cmd_train(const std::string& cache_path, const std::string& manifest_path,
              const std::string& target_name_str, const std::string& out_path,
              const std::string& history_path, const RunConfig& cfg,
              const std::string& preset) {
  const Target target = parse_target(target_name_str);
  TrainConfig tc = train_config_from(cfg);
  print_run_header("train", tc.seed);

  CacheSamples cache(cache_path);
  const auto manifest = read_manifest_csv(manifest_path);
  SubsetSamples train_set(cache, split_indices(cache, manifest, Split::kTrain));
  SubsetSamples val_set(cache, split_indices(cache, manifest, Split::kVal));
  std::cerr << "train " << train_set.size() << " val " << val_set.size() << " target "
            << target_name(target) << "\n";

  Model model(model_config_from(preset));
  model.init_params(tc.seed);
  tc.log = &std::cerr;
  const auto history = train(model, train_set, val_set, target, tc);

  save_checkpoint(model, out_path);
  if (!history_path.empty()) write_history_csv(history, history_path);
  std::cerr << "best epoch " << history.best_epoch << " (" << history.stop_reason
            << "), pos_weight " << history.pos_weight_used << "\n";
  return 0;
}

int cmd_finetune(const std::string& checkpoint_path, const std::string& cache_path,
                 const std::string& manifest_path, const std::string& target_name_str,
                 int k_frozen, double lr, const std::string& out_path,
                 const std::string& history_path, const RunConfig& cfg) {
  const Target target = parse_target(target_name_str);
  TrainConfig tc = train_config_from(cfg);
  print_run_header("finetune", tc.seed);

  Model model = load_checkpoint(checkpoint_path);
  CacheSamples cache(cache_path);
  const auto manifest = read_manifest_csv(manifest_path);
  SubsetSamples train_set(cache, split_indices(cache, manifest, Split::kTrain));
  SubsetSamples val_set(cache, split_indices(cache, manifest, Split::kVal));
  std::cerr << "finetune frozen=" << k_frozen << " lr=" << lr << " train " << train_set.size()
            << " val " << val_set.size() << "\n";

  tc.log = &std::cerr;
  const auto history = finetune(model, train_set, val_set, target, k_frozen, lr, tc);
  save_checkpoint(model, out_path);
  if (!history_path.empty()) write_history_csv(history, history_path);
  std::cerr << "best epoch " << history.best_epoch << " (" << history.stop_reason << ")\n";
  return 0;
}

int cmd_gridsearch(const std::string& cache_path, const std::string& manifest_path,
                   const std::string& target_name_str, const std::string& out_path,
                   const std::string& pretrained_path, const RunConfig& cfg,
                   const std::string& preset) {
  const Target target = parse_target(target_name_str);
  TrainConfig tc = train_config_from(cfg);
  print_run_header("gridsearch", tc.seed);

  GridSpec grid;
  grid.lrs = cfg.get_double_list("grid.lrs", grid.lrs);
  grid.factors = cfg.get_double_list("grid.factors", grid.factors);
  grid.frozen_blocks = cfg.get_int_list("grid.frozen", grid.frozen_blocks);
  grid.repeats = cfg.get_int("grid.repeats", grid.repeats);
  const std::string protocol_name = cfg.get_string("grid.protocol", "cv");
  GridProtocol protocol;
  if (protocol_name == "cv") protocol = GridProtocol::kCrossVal;
  else if (protocol_name == "holdout") protocol = GridProtocol::kHoldout;
  else throw ConfigError("grid.protocol must be cv or holdout");

  CacheSamples cache(cache_path);
  const auto manifest = read_manifest_csv(manifest_path);
  SubsetSamples train_set(cache, split_indices(cache, manifest, Split::kTrain));
  SubsetSamples val_set(cache, split_indices(cache, manifest, Split::kVal));

  std::optional<Model> pretrained;
  if (!pretrained_path.empty()) pretrained = load_checkpoint(pretrained_path);

  const auto result = grid_search(
      model_config_from(preset), train_set,
      protocol == GridProtocol::kHoldout ? &val_set : nullptr, target, tc, grid, protocol,
      pretrained ? &*pretrained : nullptr);
  write_grid_report_csv(result, out_path);

  std::cerr << "grid cells ranked by mean validation G-mean:\n";
  for (const auto& cell : result.ranked) {
    std::cerr << "  lr " << cell.cell.lr << " factor " << cell.cell.factor << " frozen "
              << cell.cell.frozen << ": mean " << cell.mean_metric << " std "
              << cell.std_metric << " (" << cell.completed << " runs, " << cell.failed
              << " failed)\n";
  }
  return 0;
}

int cmd_subsample(const std::string& manifest_path, const std::string& out_path,
                  std::uint64_t seed) {
  print_run_header("subsample", seed);
  const auto manifest = read_manifest_csv(manifest_path);
  const auto halved = stratified_halve(manifest, seed);
  write_manifest_csv(halved, out_path);
  std::cerr << "subsampled " << manifest.rows.size() << " -> " << halved.rows.size() << "\n";
  for (Target t : kAllTargets) {
    std::cerr << "  " << target_name(t) << ": " << manifest.count_positive(t) << " -> "
              << halved.count_positive(t) << "\n";
  }
  return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& cache_path,
                 const std::string& manifest_path, const std::string& split_name_str,
                 const std::string& target_name_str, double threshold, bool pick_threshold,
                 const std::string& out_prefix) {
  const Target target = parse_target(target_name_str);
  Model model = load_checkpoint(checkpoint_path);
  print_run_header("evaluate", model.seed);

  CacheSamples cache(cache_path);
  std::vector<std::size_t> indices;
  if (!manifest_path.empty()) {
    const auto manifest = read_manifest_csv(manifest_path);
    indices = split_indices(cache, manifest, split_from_string(split_name_str));
  } else {
    for (std::size_t i = 0; i < cache.size(); ++i) indices.push_back(i);
  }
  SubsetSamples samples(cache, std::move(indices));

  auto scores = score_samples(model, samples, target);
  if (pick_threshold) {
    std::vector<double> s;
    std::vector<bool> y;
    for (const auto& row : scores) {
      s.push_back(row.score);
      y.push_back(row.label);
    }
    threshold = best_gmean_threshold(s, y);
    std::cerr << "picked threshold " << threshold << " (max G-mean)\n";
  }
  const auto result = evaluate_scores(std::move(scores), threshold);

  write_scores_csv(result.scores, out_prefix + "_scores.csv");
  write_metrics_csv({{target, result.metrics}}, {{target, result.cm}},
                    out_prefix + "_metrics.csv");
  std::cerr << target_name(target) << ": " << metrics_to_string(result.metrics, result.cm)
            << "\n";
  return 0;
}

int cmd_curve(const std::string& scores_path, const std::string& out_path, int n_points) {
  print_run_header("curve", 0);
  const auto rows = read_scores_csv(scores_path);
  std::vector<double> s;
  std::vector<bool> y;
  for (const auto& row : rows) {
    s.push_back(row.score);
    y.push_back(row.label);
  }
  write_curve_csv(sweep(s, y, n_points), out_path);
  std::cerr << "curve over " << rows.size() << " scores -> " << out_path << "\n";
  return 0;
}

int cmd_compare(const std::string& predicted_path, const std::string& truth_path,
                const std::string& out_path) {
  print_run_header("compare", 0);
  const auto predicted = read_annotation_csv(predicted_path);
  const auto truth = read_annotation_csv(truth_path);
  const auto per_target = compare_annotations(predicted, truth);

  std::map<Target, ConfusionMatrix> cms;
  for (const auto& [target, m] : per_target) {
    (void)m;
    ConfusionMatrix cm;
    for (const auto& [id, truth_labels] : truth.records) {
      const bool actual = truth_labels.get(target);
      const bool pred = predicted.records.at(id).get(target);
      if (actual) pred ? ++cm.tp : ++cm.fn;
      else pred ? ++cm.fp : ++cm.tn;
    }
    cms[target] = cm;
  }
  write_metrics_csv(per_target, cms, out_path);
  for (const auto& [target, m] : per_target) {
    std::cerr << target_name(target) << ": " << metrics_to_string(m, cms[target]) << "\n";
  }
  return 0;
}

int cmd_synth(const SynthSpec& spec, const std::string& out_dir) {
  print_run_header("synth", spec.seed);
  const std::string metadata = write_synth_corpus(spec, out_dir);
  std::cerr << "wrote " << spec.n_records << " records under " << out_dir << " (metadata "
            << metadata << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECG classification toolkit: WFDB ingestion, preprocessing, 1D DenseNet "
               "training and transfer, and sensitivity/specificity evaluation"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads (results are thread-count independent)");

  std::string config_path;
  app.add_option("--config", config_path, "Run configuration file (key = value sections)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Build a filtered manifest from metadata + WFDB");
  std::string in_metadata, in_records, ingest_out;
  ingest->add_option("--metadata", in_metadata, "Metadata CSV")->required();
  ingest->add_option("--records", in_records, "Dataset root directory")->required();
  ingest->add_option("--out", ingest_out, "Output manifest CSV")->required();

  // preprocess
  auto* preprocess = app.add_subcommand("preprocess", "Resample/pad/normalize into an ECGP cache");
  std::string pre_manifest, pre_records, pre_out;
  preprocess->add_option("--manifest", pre_manifest, "Manifest CSV")->required();
  preprocess->add_option("--records", pre_records, "Dataset root directory")->required();
  preprocess->add_option("--out", pre_out, "Output cache file")->required();

  // split
  auto* split = app.add_subcommand("split", "Assign train/val/test from stratified folds");
  std::string split_manifest, split_out;
  int test_fold = 10, val_fold = 9;
  split->add_option("--manifest", split_manifest, "Manifest CSV")->required();
  split->add_option("--test-fold", test_fold, "Fold mapped to test (default 10)");
  split->add_option("--val-fold", val_fold, "Fold mapped to val (default 9)");
  split->add_option("--out", split_out, "Output manifest (default: overwrite input)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a classifier from scratch");
  std::string tr_cache, tr_manifest, tr_target, tr_out, tr_history, tr_preset = "desk_scale";
  double tr_lr = -1, tr_factor = -1, tr_pos_weight = -1;
  int tr_epochs = -1, tr_batch = -1, tr_patience = -1, tr_plateau_patience = -1;
  std::int64_t tr_seed = -1;
  train_cmd->add_option("--cache", tr_cache, "Preprocessed cache")->required();
  train_cmd->add_option("--manifest", tr_manifest, "Split manifest")->required();
  train_cmd->add_option("--target", tr_target, "Abnormality (AFIB, RBBB, ...)")->required();
  train_cmd->add_option("--out", tr_out, "Output checkpoint")->required();
  train_cmd->add_option("--history", tr_history, "Training-log CSV");
  train_cmd->add_option("--preset", tr_preset, "Model preset: desk_scale or paper_default");
  train_cmd->add_option("--lr", tr_lr, "Initial learning rate");
  train_cmd->add_option("--plateau-factor", tr_factor, "Plateau reduction factor");
  train_cmd->add_option("--plateau-patience", tr_plateau_patience, "Plateau patience");
  train_cmd->add_option("--max-epochs", tr_epochs, "Epoch budget");
  train_cmd->add_option("--early-stop-patience", tr_patience, "Early-stop patience");
  train_cmd->add_option("--batch-size", tr_batch, "Batch size");
  train_cmd->add_option("--seed", tr_seed, "Training seed");
  train_cmd->add_option("--pos-weight", tr_pos_weight, "Positive-class weight (default auto)");

  // finetune
  auto* finetune_cmd = app.add_subcommand("finetune", "Freeze a prefix and fine-tune");
  std::string ft_checkpoint, ft_cache, ft_manifest, ft_target, ft_out, ft_history;
  int ft_frozen = 7;
  double ft_lr = 0.003;
  std::int64_t ft_seed = -1;
  finetune_cmd->add_option("--checkpoint", ft_checkpoint, "Pretrained checkpoint")->required();
  finetune_cmd->add_option("--cache", ft_cache, "Preprocessed cache")->required();
  finetune_cmd->add_option("--manifest", ft_manifest, "Split manifest")->required();
  finetune_cmd->add_option("--target", ft_target, "Abnormality")->required();
  finetune_cmd->add_option("--out", ft_out, "Output checkpoint")->required();
  finetune_cmd->add_option("--history", ft_history, "Training-log CSV");
  finetune_cmd->add_option("--frozen", ft_frozen, "Frozen block count (paper winner: 7)");
  finetune_cmd->add_option("--lr", ft_lr, "Fine-tune learning rate (paper winner: 0.003)");
  finetune_cmd->add_option("--seed", ft_seed, "Training seed");
  double ft_factor = -1;
  int ft_epochs = -1, ft_batch = -1, ft_patience = -1, ft_plateau_patience = -1;
  finetune_cmd->add_option("--plateau-factor", ft_factor, "Plateau reduction factor");
  finetune_cmd->add_option("--plateau-patience", ft_plateau_patience, "Plateau patience");
  finetune_cmd->add_option("--max-epochs", ft_epochs, "Epoch budget");
  finetune_cmd->add_option("--early-stop-patience", ft_patience, "Early-stop patience");
  finetune_cmd->add_option("--batch-size", ft_batch, "Batch size");

  // gridsearch
  auto* grid_cmd = app.add_subcommand("gridsearch", "Exhaustive hyperparameter grid");
  std::string gs_cache, gs_manifest, gs_target, gs_out, gs_pretrained, gs_preset = "desk_scale";
  grid_cmd->add_option("--cache", gs_cache, "Preprocessed cache")->required();
  grid_cmd->add_option("--manifest", gs_manifest, "Split manifest")->required();
  grid_cmd->add_option("--target", gs_target, "Abnormality")->required();
  grid_cmd->add_option("--out", gs_out, "Report CSV")->required();
  grid_cmd->add_option("--pretrained", gs_pretrained, "Checkpoint for frozen>0 cells");
  grid_cmd->add_option("--preset", gs_preset, "Model preset");

  // subsample
  auto* subsample = app.add_subcommand("subsample", "Prevalence-preserving half manifest");
  std::string ss_manifest, ss_out;
  std::uint64_t ss_seed = 0;
  subsample->add_option("--manifest", ss_manifest, "Manifest CSV")->required();
  subsample->add_option("--out", ss_out, "Output manifest CSV")->required();
  subsample->add_option("--seed", ss_seed, "Selection seed");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint and compute metrics");
  std::string ev_checkpoint, ev_cache, ev_manifest, ev_split = "test", ev_target, ev_out;
  double ev_threshold = 0.5;
  bool ev_pick = false;
  eval_cmd->add_option("--checkpoint", ev_checkpoint, "Model checkpoint")->required();
  eval_cmd->add_option("--cache", ev_cache, "Preprocessed cache")->required();
  eval_cmd->add_option("--target", ev_target, "Abnormality")->required();
  eval_cmd->add_option("--out", ev_out, "Output prefix (_metrics.csv, _scores.csv)")->required();
  eval_cmd->add_option("--manifest", ev_manifest, "Restrict to one split of this manifest");
  eval_cmd->add_option("--split", ev_split, "Split to evaluate (default test)");
  eval_cmd->add_option("--threshold", ev_threshold, "Decision threshold (default 0.5)");
  eval_cmd->add_flag("--best-threshold", ev_pick, "Pick the G-mean-maximizing threshold");

  // curve
  auto* curve_cmd = app.add_subcommand("curve", "Sensitivity/specificity curve from scores");
  std::string cv_scores, cv_out;
  int cv_points = 200;
  curve_cmd->add_option("--scores", cv_scores, "Score dump CSV")->required();
  curve_cmd->add_option("--out", cv_out, "Curve CSV")->required();
  curve_cmd->add_option("--points", cv_points, "Sweep points (default 200)");

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "Score annotations against truth");
  std::string cp_pred, cp_truth, cp_out;
  compare_cmd->add_option("--predicted", cp_pred, "Annotator CSV")->required();
  compare_cmd->add_option("--truth", cp_truth, "Truth CSV")->required();
  compare_cmd->add_option("--out", cp_out, "Metrics CSV")->required();

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic WFDB corpus");
  std::string sy_out, sy_target = "AFIB";
  SynthSpec sy_spec;
  synth_cmd->add_option("--out", sy_out, "Output directory")->required();
  synth_cmd->add_option("--records", sy_spec.n_records, "Record count");
  synth_cmd->add_option("--prevalence", sy_spec.prevalence, "Positive fraction");
  synth_cmd->add_option("--seed", sy_spec.seed, "Corpus seed");
  synth_cmd->add_option("--target", sy_target, "Abnormality the positives carry");
  synth_cmd->add_option("--burst-freq", sy_spec.burst_freq_hz, "Burst frequency, Hz");
  synth_cmd->add_option("--burst-amplitude", sy_spec.burst_amplitude, "Burst amplitude, mV");
  synth_cmd->add_option("--noise-rho", sy_spec.noise_rho, "AR(1) pole of the background");
  synth_cmd->add_option("--frac-1000hz", sy_spec.frac_1000hz, "Fraction recorded at 1 kHz");
  synth_cmd->add_option("--frac-9s", sy_spec.frac_9s, "Fraction 9 s long");
  synth_cmd->add_option("--frac-underage", sy_spec.frac_underage, "Fraction under 18");
  synth_cmd->add_option("--frac-flat", sy_spec.frac_flat_lead, "Fraction with a flat lead");
  synth_cmd->add_option("--frac-short", sy_spec.frac_short, "Fraction 8.5 s long");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp" ||
        e.get_name() == "CallForVersion") {
      return app.exit(e);
    }
    std::cerr << e.what() << "\n";
    return 1;
  }

  try {
    set_num_threads(threads);
    RunConfig cfg = load_config(config_path);

    // Command-line overrides win over file values.
    const auto override_num = [&cfg](const std::string& key, double v, double unset) {
      if (v != unset) cfg.set(key, std::to_string(v));
    };

    if (*ingest) return cmd_ingest(in_metadata, in_records, ingest_out);
    if (*preprocess) return cmd_preprocess(pre_manifest, pre_records, pre_out, cfg);
    if (*split) return cmd_split(split_manifest, test_fold, val_fold, split_out);
    if (*train_cmd) {
      override_num("training.lr", tr_lr, -1);
      override_num("training.plateau_factor", tr_factor, -1);
      override_num("training.plateau_patience", tr_plateau_patience, -1);
      override_num("training.max_epochs", tr_epochs, -1);
      override_num("training.early_stop_patience", tr_patience, -1);
      override_num("training.batch_size", tr_batch, -1);
      override_num("training.pos_weight", tr_pos_weight, -1);
      if (tr_seed >= 0) cfg.set("training.seed", std::to_string(tr_seed));
      return cmd_train(tr_cache, tr_manifest, tr_target, tr_out, tr_history, cfg, tr_preset);
    }
    if (*finetune_cmd) {
      override_num("training.plateau_factor", ft_factor, -1);
      override_num("training.plateau_patience", ft_plateau_patience, -1);
      override_num("training.max_epochs", ft_epochs, -1);
      override_num("training.early_stop_patience", ft_patience, -1);
      override_num("training.batch_size", ft_batch, -1);
      if (ft_seed >= 0) cfg.set("training.seed", std::to_string(ft_seed));
      return cmd_finetune(ft_checkpoint, ft_cache, ft_manifest, ft_target, ft_frozen, ft_lr,
                          ft_out, ft_history, cfg);
    }
    if (*grid_cmd) {
      return cmd_gridsearch(gs_cache, gs_manifest, gs_target, gs_out, gs_pretrained, cfg,
                            gs_preset);
    }
    if (*subsample) return cmd_subsample(ss_manifest, ss_out, ss_seed);
    if (*eval_cmd) {
      return cmd_evaluate(ev_checkpoint, ev_cache, ev_manifest, ev_split, ev_target,
                          ev_threshold, ev_pick, ev_out);
    }
    if (*curve_cmd) return cmd_curve(cv_scores, cv_out, cv_points);
    if (*compare_cmd) return cmd_compare(cp_pred, cp_truth, cp_out);
    if (*synth_cmd) {
      sy_spec.target = parse_target(sy_target);
      return cmd_synth(sy_spec, sy_out);
    }
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigInvalid& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const NonFiniteLoss& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
