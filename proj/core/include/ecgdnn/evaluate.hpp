#pragma once

#include <string>
#include <vector>

#include "ecgdnn/cache.hpp"
#include "ecgdnn/densenet.hpp"
#include "ecgdnn/metrics.hpp"

namespace ecgdnn {

struct ScoreRow {
  std::string record_id;
  double score = 0.0;  // sigmoid probability
  bool label = false;
};

struct EvaluationResult {
  MetricSet metrics;
  ConfusionMatrix cm;
  std::vector<ScoreRow> scores;
};

/// Eval-mode forward over the whole set, sigmoid, threshold, metrics.
/// Scores are kept so curves can be replayed without rerunning the model.
EvaluationResult evaluate(Model& model, const SampleSource& samples, Target target,
                          double threshold = 0.5, int batch_size = 64);

/// Computes sigmoid scores only (no thresholding).
std::vector<ScoreRow> score_samples(Model& model, const SampleSource& samples, Target target,
                                    int batch_size = 64);

/// Metrics from already-computed scores.
EvaluationResult evaluate_scores(std::vector<ScoreRow> scores, double threshold);

/// Score dump CSV: record_id, score, label. Scores print with %.9g so
/// float32 probabilities survive the round trip exactly.
void write_scores_csv(const std::vector<ScoreRow>& scores, const std::string& path);
std::vector<ScoreRow> read_scores_csv(const std::string& path);

/// Curve CSV: threshold, sensitivity, specificity.
void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path);

std::string metrics_to_string(const MetricSet& m, const ConfusionMatrix& cm);

}  // namespace ecgdnn
