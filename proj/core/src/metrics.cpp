#include "ecgdnn/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "ecgdnn/csv.hpp"
#include "ecgdnn/errors.hpp"

namespace ecgdnn {

ConfusionMatrix confusion(const std::vector<double>& scores, const std::vector<bool>& labels,
                          double threshold) {
  if (scores.size() != labels.size()) {
    throw LengthMismatch("confusion needs matching score/label counts");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i]) {
      predicted ? ++cm.tp : ++cm.fn;
    } else {
      predicted ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

MetricSet metrics(const ConfusionMatrix& cm, double threshold) {
  MetricSet m;
  m.threshold = threshold;
  if (cm.tp + cm.fn > 0) {
    m.sensitivity = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  }
  if (cm.tn + cm.fp > 0) {
    m.specificity = static_cast<double>(cm.tn) / static_cast<double>(cm.tn + cm.fp);
  }
  if (m.sensitivity && m.specificity) {
    m.gmean = std::sqrt(*m.sensitivity * *m.specificity);
  }
  if (m.sensitivity && cm.tp + cm.fp > 0) {
    const double p = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    const double r = *m.sensitivity;
    if (4.0 * p + r > 0) {
      m.f2 = 5.0 * p * r / (4.0 * p + r);
    } else {
      m.f2 = 0.0;  // tp == 0 with predicted and actual positives present
    }
  }
  return m;
}

std::vector<CurvePoint> sweep(const std::vector<double>& scores,
                              const std::vector<bool>& labels, int n_points) {
  if (scores.size() != labels.size()) {
    throw LengthMismatch("sweep needs matching score/label counts");
  }
  if (n_points < 2) n_points = 2;

  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<double> thresholds;
  thresholds.push_back(0.0);
  thresholds.push_back(1.0);
  if (!sorted.empty()) {
    for (int q = 0; q < n_points; ++q) {
      const std::size_t idx =
          static_cast<std::size_t>(q) * (sorted.size() - 1) / static_cast<std::size_t>(n_points - 1);
      thresholds.push_back(sorted[idx]);
    }
  }
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<CurvePoint> curve;
  curve.reserve(thresholds.size());
  for (double t : thresholds) {
    const auto cm = confusion(scores, labels, t);
    const auto m = metrics(cm, t);
    curve.push_back({t, m.sensitivity.value_or(0.0), m.specificity.value_or(0.0)});
  }
  return curve;
}

double best_gmean_threshold(const std::vector<double>& scores, const std::vector<bool>& labels,
                            int n_points) {
  const auto curve = sweep(scores, labels, n_points);
  double best_t = 0.5;
  double best_g = -1.0;
  for (const auto& point : curve) {
    const double g = std::sqrt(point.sensitivity * point.specificity);
    if (g > best_g) {
      best_g = g;
      best_t = point.threshold;
    }
  }
  return best_t;
}

AnnotationFile read_annotation_csv(const std::string& path) {
  const auto lines = split_lines(read_text_file(path));
  AnnotationFile ann;
  std::size_t first = 0;
  if (!lines.empty() && lines[0] == "record_id,target,flag") first = 1;
  for (std::size_t i = first; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = csv_split(lines[i]);
    if (f.size() != 3) {
      throw IoError("annotation row " + std::to_string(i + 1) + " needs record_id,target,flag");
    }
    const Target t = target_from_name(f[1]);
    ann.records[f[0]].set(t, f[2] == "1");
  }
  return ann;
}

void write_annotation_csv(const AnnotationFile& ann, const std::string& path) {
  std::string out = "record_id,target,flag\n";
  for (const auto& [id, labels] : ann.records) {
    for (Target t : kAllTargets) {
      out += csv_join({id, std::string(target_name(t)), labels.get(t) ? "1" : "0"}) + "\n";
    }
  }
  write_text_file(path, out);
}

std::map<Target, MetricSet> compare_annotations(const AnnotationFile& predicted,
                                                const AnnotationFile& truth) {
  if (predicted.records.size() != truth.records.size()) {
    throw KeyMismatch("annotation files cover different record counts");
  }
  for (const auto& [id, labels] : truth.records) {
    (void)labels;
    if (!predicted.records.count(id)) {
      throw KeyMismatch("record " + id + " missing from predictions");
    }
  }

  std::map<Target, MetricSet> out;
  for (Target t : kAllTargets) {
    ConfusionMatrix cm;
    for (const auto& [id, truth_labels] : truth.records) {
      const bool actual = truth_labels.get(t);
      const bool pred = predicted.records.at(id).get(t);
      if (actual) {
        pred ? ++cm.tp : ++cm.fn;
      } else {
        pred ? ++cm.fp : ++cm.tn;
      }
    }
    out[t] = metrics(cm, 0.5);
  }
  return out;
}

}  // namespace ecgdnn
