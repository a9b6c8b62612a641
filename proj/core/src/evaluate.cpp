#include "ecgdnn/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ecgdnn/csv.hpp"
#include "ecgdnn/errors.hpp"

namespace ecgdnn {

std::vector<ScoreRow> score_samples(Model& model, const SampleSource& samples, Target target,
                                    int batch_size) {
  const std::size_t n = samples.size();
  if (n == 0) throw EmptyDataset("score_samples on an empty set");
  const auto [leads, len] = samples.tensor_shape();
  if (model.config().input_leads != leads || model.config().input_len != len) {
    throw ShapeMismatch("score_samples: source shape does not match the model input");
  }
  const std::size_t tensor_len = samples.tensor_len();

  std::vector<ScoreRow> rows;
  rows.reserve(n);
  for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(n, begin + static_cast<std::size_t>(batch_size));
    const std::int64_t b = static_cast<std::int64_t>(end - begin);
    Tensor<float> x = Tensor<float>::zeros({b, leads, len});
    for (std::size_t i = begin; i < end; ++i) {
      samples.fill_tensor(i, x.data() + (i - begin) * tensor_len);
    }
    Tensor<float> logits = model.forward(x, BatchNormMode::kEval, nullptr);
    Tensor<float> probs = sigmoid<float>(logits, nullptr);
    for (std::size_t i = begin; i < end; ++i) {
      ScoreRow row;
      row.record_id = samples.id(i);
      row.score = static_cast<double>(probs.values()[i - begin]);
      row.label = samples.labels(i).get(target);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

EvaluationResult evaluate_scores(std::vector<ScoreRow> scores, double threshold) {
  std::vector<double> s;
  std::vector<bool> y;
  s.reserve(scores.size());
  y.reserve(scores.size());
  for (const auto& row : scores) {
    s.push_back(row.score);
    y.push_back(row.label);
  }
  EvaluationResult result;
  result.cm = confusion(s, y, threshold);
  result.metrics = metrics(result.cm, threshold);
  result.scores = std::move(scores);
  return result;
}

EvaluationResult evaluate(Model& model, const SampleSource& samples, Target target,
                          double threshold, int batch_size) {
  return evaluate_scores(score_samples(model, samples, target, batch_size), threshold);
}

void write_scores_csv(const std::vector<ScoreRow>& scores, const std::string& path) {
  std::string out = "record_id,score,label\n";
  char buf[64];
  for (const auto& row : scores) {
    std::snprintf(buf, sizeof(buf), ",%.9g,%d\n", row.score, row.label ? 1 : 0);
    out += csv_quote(row.record_id);
    out += buf;
  }
  write_text_file(path, out);
}

std::vector<ScoreRow> read_scores_csv(const std::string& path) {
  const auto lines = split_lines(read_text_file(path));
  std::vector<ScoreRow> rows;
  std::size_t first = 0;
  if (!lines.empty() && lines[0] == "record_id,score,label") first = 1;
  for (std::size_t i = first; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = csv_split(lines[i]);
    if (f.size() != 3) throw IoError("score row " + std::to_string(i + 1) + " malformed");
    rows.push_back({f[0], std::atof(f[1].c_str()), f[2] == "1"});
  }
  return rows;
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path) {
  std::string out = "threshold,sensitivity,specificity\n";
  char buf[96];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", p.threshold, p.sensitivity,
                  p.specificity);
    out += buf;
  }
  write_text_file(path, out);
}

std::string metrics_to_string(const MetricSet& m, const ConfusionMatrix& cm) {
  const auto fmt = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", *v);
    return std::string(buf);
  };
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "threshold %.4g sens %s spec %s gmean %s f2 %s (tp %lld fp %lld fn %lld tn %lld)",
                m.threshold, fmt(m.sensitivity).c_str(), fmt(m.specificity).c_str(),
                fmt(m.gmean).c_str(), fmt(m.f2).c_str(), static_cast<long long>(cm.tp),
                static_cast<long long>(cm.fp), static_cast<long long>(cm.fn),
                static_cast<long long>(cm.tn));
  return buf;
}

}  // namespace ecgdnn
