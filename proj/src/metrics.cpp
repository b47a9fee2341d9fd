#include "deconfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "deconfuse/errors.hpp"

namespace deconfuse {

double mae(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw ShapeError("mae: length mismatch");
  if (pred.empty()) throw std::invalid_argument("mae: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - truth[i]);
  return acc / static_cast<double>(pred.size());
}

ClassificationMetrics classification_metrics(const std::vector<int>& pred_labels,
                                             const std::vector<double>& pred_scores,
                                             const std::vector<int>& truth) {
  if (truth.empty()) throw std::invalid_argument("classification_metrics: empty input");
  if (pred_labels.size() != truth.size() || pred_scores.size() != truth.size())
    throw ShapeError("classification_metrics: length mismatch");

  std::size_t tp = 0, fp = 0, fn = 0;
  std::size_t positives = 0, negatives = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 1) {
      ++positives;
      if (pred_labels[i] == 1)
        ++tp;
      else
        ++fn;
    } else {
      ++negatives;
      if (pred_labels[i] == 1) ++fp;
    }
  }

  ClassificationMetrics out;
  out.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  out.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  out.f1 = out.precision + out.recall == 0.0
               ? 0.0
               : 2.0 * out.precision * out.recall / (out.precision + out.recall);

  if (positives == 0 || negatives == 0) return out;  // AUC undefined

  // Mann-Whitney via average ranks; tied scores share their rank, which is
  // exactly the 0.5 pairwise credit.
  std::vector<std::size_t> order(truth.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pred_scores[a] < pred_scores[b];
  });
  double rank_sum_positive = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && pred_scores[order[j + 1]] == pred_scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t t = i; t <= j; ++t)
      if (truth[order[t]] == 1) rank_sum_positive += avg_rank;
    i = j + 1;
  }
  const double p = static_cast<double>(positives);
  const double n = static_cast<double>(negatives);
  out.auc = (rank_sum_positive - p * (p + 1.0) / 2.0) / (p * n);
  return out;
}

std::vector<std::pair<double, double>> roc_points(const std::vector<double>& scores,
                                                  const std::vector<int>& truth) {
  if (scores.size() != truth.size()) throw ShapeError("roc_points: length mismatch");
  std::size_t positives = 0, negatives = 0;
  for (const int t : truth) (t == 1 ? positives : negatives)++;
  if (positives == 0 || negatives == 0) return {};

  std::vector<std::size_t> order(truth.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<std::pair<double, double>> points;
  points.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    for (std::size_t t = i; t <= j; ++t)
      (truth[order[t]] == 1 ? tp : fp)++;
    points.emplace_back(static_cast<double>(fp) / static_cast<double>(negatives),
                        static_cast<double>(tp) / static_cast<double>(positives));
    i = j + 1;
  }
  return points;
}

}  // namespace deconfuse
