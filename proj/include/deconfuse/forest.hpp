#pragma once

#include <cstdint>
#include <vector>

#include "deconfuse/tensor.hpp"

namespace deconfuse {

/// A binary decision tree stored as a flat node array; leaves carry the
/// class probability pair (p_sell, p_buy) of their training samples.
struct DecisionTree {
  struct Node {
    bool leaf = true;
    std::size_t feature = 0;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double p0 = 0.5;
    double p1 = 0.5;
  };
  std::vector<Node> nodes;

  double predict_proba(const double* row) const;
};

struct ForestOptions {
  std::size_t trees = 5;
  std::size_t max_depth = 3;
  bool bootstrap = true;
  bool feature_subsampling = true;  // ceil(sqrt(O)) candidate features per split
};

/// Random decision forest: Gini-split trees on bootstrap resamples with
/// per-split feature subsampling.
struct ForestModel {
  std::vector<DecisionTree> trees;
  std::vector<std::uint64_t> tree_seeds;
  std::vector<std::vector<std::size_t>> inbag;  // bootstrap indices per tree
  std::size_t feature_dim = 0;
  ForestOptions options;
  bool trained = false;
};

/// Trains the forest. Requires both classes present and at least 10 rows.
ForestModel forest_fit(const Matrix& z, const std::vector<int>& labels, std::uint64_t seed,
                       const ForestOptions& options = {});

/// Same, with caller-provided bootstrap index lists (one per tree); used by
/// the permutation-consistency tests.
ForestModel forest_fit_with_bootstrap(const Matrix& z, const std::vector<int>& labels,
                                      std::uint64_t seed,
                                      const std::vector<std::vector<std::size_t>>& inbag,
                                      const ForestOptions& options = {});

/// Mean leaf probability of the buy class over all trees, one value per row.
std::vector<double> forest_predict_proba(const ForestModel& model, const Matrix& z);

/// Accuracy on rows left out of each tree's bootstrap (majority vote over
/// the trees that did not see the row). Rows seen by every tree are skipped.
double forest_oob_accuracy(const ForestModel& model, const Matrix& z,
                           const std::vector<int>& labels);

}  // namespace deconfuse
