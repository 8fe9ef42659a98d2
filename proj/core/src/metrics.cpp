#include "sonarssl/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "sonarssl/error.hpp"

namespace sonarssl {

namespace {

constexpr double kProbClamp = 1e-7;

void check_binary(const std::vector<std::uint8_t>& labels, const char* what) {
  for (std::uint8_t y : labels)
    if (y > 1) throw InputError(std::string(what) + ": labels must be 0 or 1");
}

void check_paired(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw InputError(std::string(what) + ": length mismatch");
  if (a == 0) throw InputError(std::string(what) + ": empty input");
}

// Indices sorted by score descending; the stable tie order never matters
// because tied scores are always consumed as one group.
std::vector<std::size_t> by_score_desc(const std::vector<double>& scores) {
  std::vector<std::size_t> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double bce_loss(const std::vector<double>& probabilities,
                const std::vector<std::uint8_t>& labels) {
  check_paired(probabilities.size(), labels.size(), "bce_loss");
  check_binary(labels, "bce_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(probabilities[i], kProbClamp, 1.0 - kProbClamp);
    sum -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return sum / static_cast<double>(labels.size());
}

double logistic(double logit) { return 1.0 / (1.0 + std::exp(-logit)); }

std::uint8_t classify(double probability, double threshold) {
  return probability >= threshold ? 1 : 0;
}

Confusion confusion(const std::vector<std::uint8_t>& predictions,
                    const std::vector<std::uint8_t>& labels) {
  check_paired(predictions.size(), labels.size(), "confusion");
  check_binary(predictions, "confusion");
  check_binary(labels, "confusion");
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == 1)
      (labels[i] == 1 ? c.tp : c.fp)++;
    else
      (labels[i] == 1 ? c.fn : c.tn)++;
  }
  return c;
}

double precision(const Confusion& c) {
  const std::size_t denom = c.tp + c.fp;
  return denom == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}

double recall(const Confusion& c) {
  const std::size_t denom = c.tp + c.fn;
  return denom == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}

double accuracy(const Confusion& c) {
  if (c.total() == 0) throw UndefinedMetricError("accuracy: empty confusion matrix");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

std::vector<CurvePoint> roc_curve(const std::vector<double>& scores,
                                  const std::vector<std::uint8_t>& labels) {
  check_paired(scores.size(), labels.size(), "roc_curve");
  check_binary(labels, "roc_curve");
  std::size_t n_pos = 0;
  for (std::uint8_t y : labels) n_pos += y;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw UndefinedMetricError("roc_curve: needs both classes present");

  const std::vector<std::size_t> order = by_score_desc(scores);
  std::vector<CurvePoint> points;
  points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == threshold; ++i)
      (labels[order[i]] == 1 ? tp : fp)++;
    points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                      static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  return points;  // final point is (1,1): the lowest threshold admits all
}

double auc(const std::vector<CurvePoint>& points) {
  if (points.size() < 2) throw InputError("auc: need at least two curve points");
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double dx = points[i].x - points[i - 1].x;
    if (dx < 0.0) throw InputError("auc: points must be sorted by x");
    area += dx * (points[i].y + points[i - 1].y) / 2.0;
  }
  return area;
}

std::vector<CurvePoint> pr_curve(const std::vector<double>& scores,
                                 const std::vector<std::uint8_t>& labels) {
  check_paired(scores.size(), labels.size(), "pr_curve");
  check_binary(labels, "pr_curve");
  std::size_t n_pos = 0;
  for (std::uint8_t y : labels) n_pos += y;
  if (n_pos == 0) throw UndefinedMetricError("pr_curve: needs at least one positive");

  const std::vector<std::size_t> order = by_score_desc(scores);
  std::vector<CurvePoint> points;
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == threshold; ++i)
      (labels[order[i]] == 1 ? tp : fp)++;
    points.push_back({static_cast<double>(tp) / static_cast<double>(n_pos),
                      static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return points;  // descending thresholds give ascending recall
}

MetricsReport evaluate_scores(const std::vector<double>& scores,
                              const std::vector<std::uint8_t>& labels, double threshold,
                              const std::string& model_id, double label_fraction) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ConfigError("evaluate_scores: threshold must lie in (0, 1)");
  MetricsReport report;
  report.model_id = model_id;
  report.label_fraction = label_fraction;
  std::vector<std::uint8_t> predictions(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) predictions[i] = classify(scores[i], threshold);
  report.counts = confusion(predictions, labels);
  report.precision = precision(report.counts);
  report.recall = recall(report.counts);
  report.accuracy = accuracy(report.counts);
  report.roc_points = roc_curve(scores, labels);
  report.auc = auc(report.roc_points);
  report.pr_points = pr_curve(scores, labels);
  return report;
}

double relative_accuracy(const MetricsReport& report, const MetricsReport& baseline) {
  if (report.counts.total() != baseline.counts.total())
    throw InputError("relative_accuracy: reports cover different test-set sizes");
  return report.accuracy - baseline.accuracy;
}

}  // namespace sonarssl
