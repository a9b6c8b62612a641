#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecgdnn/labels.hpp"

namespace ecgdnn {

struct ConfusionMatrix {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::int64_t total() const { return tp + fp + fn + tn; }
};

/// Sensitivity, specificity, G-mean and F2. A metric whose denominator is
/// empty (no positives, no negatives, or no predicted positives) is left
/// unset rather than forced to 0, so degenerate classes are visible instead
/// of silently skewing aggregates.
struct MetricSet {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> gmean;
  std::optional<double> f2;
  double threshold = 0.5;
};

struct CurvePoint {
  double threshold;
  double sensitivity;
  double specificity;
};

/// Counts outcomes with the rule: predict positive iff score >= threshold.
ConfusionMatrix confusion(const std::vector<double>& scores, const std::vector<bool>& labels,
                          double threshold);

/// sens = tp/(tp+fn), spec = tn/(tn+fp), gmean = sqrt(sens*spec),
/// f2 = 5*p*r / (4p + r) with p = tp/(tp+fp), r = sens.
MetricSet metrics(const ConfusionMatrix& cm, double threshold = 0.5);

/// Sensitivity/specificity pairs swept over score quantiles plus {0, 1},
/// sorted by ascending threshold. As the threshold rises, sensitivity is
/// non-increasing and specificity non-decreasing.
std::vector<CurvePoint> sweep(const std::vector<double>& scores,
                              const std::vector<bool>& labels, int n_points = 200);

/// Picks the threshold (among candidate sweep points) maximizing G-mean.
/// Used to select an operating point on validation scores.
double best_gmean_threshold(const std::vector<double>& scores,
                            const std::vector<bool>& labels, int n_points = 200);

/// One annotation row: a flag for one (record, target) pair.
struct AnnotationFile {
  // record_id -> per-target flags; absent targets count as negative.
  std::map<std::string, LabelSet> records;
};

AnnotationFile read_annotation_csv(const std::string& path);
void write_annotation_csv(const AnnotationFile& ann, const std::string& path);

/// Scores an annotator against truth, per target. Both files must cover the
/// same record ids (KeyMismatch otherwise).
std::map<Target, MetricSet> compare_annotations(const AnnotationFile& predicted,
                                                const AnnotationFile& truth);

}  // namespace ecgdnn
