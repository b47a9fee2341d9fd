#pragma once

#include <optional>
#include <span>
#include <vector>

namespace deconfuse {

/// Mean absolute error. Throws ShapeError on length mismatch and
/// std::invalid_argument on empty input.
double mae(std::span<const double> pred, std::span<const double> truth);

struct ClassificationMetrics {
  double precision = 0.0;  // buy class
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;  // absent when truth has a single class
};

/// Precision/recall/F1 on the buy (1) class plus rank-based AUC with half
/// credit for tied scores. Empty inputs raise std::invalid_argument.
ClassificationMetrics classification_metrics(const std::vector<int>& pred_labels,
                                             const std::vector<double>& pred_scores,
                                             const std::vector<int>& truth);

/// Points of the ROC curve, one (fpr, tpr) pair per distinct threshold,
/// sorted from (0,0) to (1,1).
std::vector<std::pair<double, double>> roc_points(const std::vector<double>& scores,
                                                  const std::vector<int>& truth);

}  // namespace deconfuse
