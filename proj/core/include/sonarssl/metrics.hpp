#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sonarssl {

// Binary cross entropy over probabilities clamped to [1e-7, 1 - 1e-7].
double bce_loss(const std::vector<double>& probabilities, const std::vector<std::uint8_t>& labels);

double logistic(double logit);

// Probability >= threshold maps to class 1 (boundary inclusive).
std::uint8_t classify(double probability, double threshold);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

Confusion confusion(const std::vector<std::uint8_t>& predictions,
                    const std::vector<std::uint8_t>& labels);

// 0/0 convention: no predicted positives -> precision 0; no actual positives
// -> recall 0.
double precision(const Confusion& c);
double recall(const Confusion& c);
double accuracy(const Confusion& c);

struct CurvePoint {
  double x = 0.0;  // ROC: false-positive rate; PR: recall
  double y = 0.0;  // ROC: true-positive rate; PR: precision
};

// One point per distinct score threshold (classification rule: score >=
// threshold), descending, preceded by the (0,0) sentinel and ending at (1,1).
// Needs both classes present.
std::vector<CurvePoint> roc_curve(const std::vector<double>& scores,
                                  const std::vector<std::uint8_t>& labels);

// Trapezoidal area under an x-sorted curve; ties in scores show up as
// diagonal ROC segments, so this equals the Mann-Whitney statistic with ties
// counted half.
double auc(const std::vector<CurvePoint>& points);

// Precision/recall at every distinct threshold, in ascending-recall order.
// Needs at least one positive label.
std::vector<CurvePoint> pr_curve(const std::vector<double>& scores,
                                 const std::vector<std::uint8_t>& labels);

struct MetricsReport {
  std::string model_id;
  double label_fraction = 1.0;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  double auc = 0.0;
  Confusion counts;
  std::vector<CurvePoint> roc_points;
  std::vector<CurvePoint> pr_points;
};

// All metrics and both curves from one set of scores; scores are
// probabilities, thresholded at `threshold` for the confusion counts.
MetricsReport evaluate_scores(const std::vector<double>& scores,
                              const std::vector<std::uint8_t>& labels, double threshold,
                              const std::string& model_id, double label_fraction);

// Accuracy difference in probability points (report minus baseline); both
// reports must come from equally sized test sets.
double relative_accuracy(const MetricsReport& report, const MetricsReport& baseline);

}  // namespace sonarssl
