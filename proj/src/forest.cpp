#include "deconfuse/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "deconfuse/rng.hpp"

namespace deconfuse {

double DecisionTree::predict_proba(const double* row) const {
  std::int32_t at = 0;
  while (!nodes[static_cast<std::size_t>(at)].leaf) {
    const Node& n = nodes[static_cast<std::size_t>(at)];
    at = row[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(at)].p1;
}

namespace {

struct TreeBuilder {
  const Matrix& z;
  const std::vector<int>& labels;
  const ForestOptions& options;
  Rng& rng;
  DecisionTree tree;

  std::size_t feature_candidates() const {
    if (!options.feature_subsampling) return z.cols;
    return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(z.cols))));
  }

  // Candidate features for one split, drawn without replacement. Depends
  // only on the RNG stream and node visit order, never on row order.
  std::vector<std::size_t> draw_features() {
    std::vector<std::size_t> all(z.cols);
    for (std::size_t i = 0; i < z.cols; ++i) all[i] = i;
    const std::size_t take = feature_candidates();
    for (std::size_t i = 0; i < take; ++i)
      std::swap(all[i], all[i + rng.index(z.cols - i)]);
    all.resize(take);
    std::sort(all.begin(), all.end());
    return all;
  }

  static double gini(std::size_t n0, std::size_t n1) {
    const double n = static_cast<double>(n0 + n1);
    if (n == 0.0) return 0.0;
    const double p0 = static_cast<double>(n0) / n;
    const double p1 = static_cast<double>(n1) / n;
    return 1.0 - p0 * p0 - p1 * p1;
  }

  std::int32_t build(std::vector<std::size_t> rows, std::size_t depth) {
    std::size_t n1 = 0;
    for (const std::size_t r : rows) n1 += static_cast<std::size_t>(labels[r] == 1);
    const std::size_t n0 = rows.size() - n1;

    const auto make_leaf = [&] {
      DecisionTree::Node leaf;
      leaf.leaf = true;
      const double total = static_cast<double>(rows.size());
      leaf.p0 = static_cast<double>(n0) / total;
      leaf.p1 = static_cast<double>(n1) / total;
      tree.nodes.push_back(leaf);
      return static_cast<std::int32_t>(tree.nodes.size() - 1);
    };

    if (depth >= options.max_depth || n0 == 0 || n1 == 0 || rows.size() < 2) return make_leaf();

    // greedy Gini split over the drawn feature subset; ties break to the
    // smallest feature index, then the smallest threshold
    const std::vector<std::size_t> features = draw_features();
    double best_score = std::numeric_limits<double>::infinity();
    std::size_t best_feature = 0;
    double best_threshold = 0.0;
    bool found = false;

    std::vector<std::pair<double, int>> sorted;
    for (const std::size_t f : features) {
      sorted.clear();
      for (const std::size_t r : rows) sorted.emplace_back(z.at(r, f), labels[r]);
      std::sort(sorted.begin(), sorted.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      std::size_t left0 = 0, left1 = 0;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        left1 += static_cast<std::size_t>(sorted[i].second == 1);
        left0 += static_cast<std::size_t>(sorted[i].second != 1);
        if (sorted[i].first == sorted[i + 1].first) continue;
        const double threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
        if (threshold >= sorted[i + 1].first || threshold < sorted[i].first)
          continue;  // midpoint rounded onto a sample value, split degenerate
        const std::size_t right1 = n1 - left1;
        const std::size_t right0 = n0 - left0;
        const double total = static_cast<double>(rows.size());
        const double score = (static_cast<double>(left0 + left1) / total) * gini(left0, left1) +
                             (static_cast<double>(right0 + right1) / total) * gini(right0, right1);
        if (score < best_score - 1e-15 ||
            (std::abs(score - best_score) <= 1e-15 &&
             (f < best_feature || (f == best_feature && threshold < best_threshold)))) {
          best_score = score;
          best_feature = f;
          best_threshold = threshold;
          found = true;
        }
      }
    }
    if (!found) return make_leaf();

    std::vector<std::size_t> left_rows, right_rows;
    for (const std::size_t r : rows)
      (z.at(r, best_feature) <= best_threshold ? left_rows : right_rows).push_back(r);
    if (left_rows.empty() || right_rows.empty()) return make_leaf();

    DecisionTree::Node split;
    split.leaf = false;
    split.feature = best_feature;
    split.threshold = best_threshold;
    tree.nodes.push_back(split);
    const std::int32_t id = static_cast<std::int32_t>(tree.nodes.size() - 1);
    const std::int32_t left_id = build(std::move(left_rows), depth + 1);
    const std::int32_t right_id = build(std::move(right_rows), depth + 1);
    tree.nodes[static_cast<std::size_t>(id)].left = left_id;
    tree.nodes[static_cast<std::size_t>(id)].right = right_id;
    return id;
  }
};

void check_training_input(const Matrix& z, const std::vector<int>& labels) {
  if (labels.size() != z.rows) throw ShapeError("forest_fit: label count != row count");
  if (z.rows < 10) throw std::invalid_argument("forest_fit: need at least 10 rows");
  bool has0 = false, has1 = false;
  for (const int l : labels) {
    has0 = has0 || l == 0;
    has1 = has1 || l == 1;
  }
  if (!has0 || !has1)
    throw DegenerateLabelsError("forest_fit: training labels contain a single class");
}

}  // namespace

ForestModel forest_fit_with_bootstrap(const Matrix& z, const std::vector<int>& labels,
                                      std::uint64_t seed,
                                      const std::vector<std::vector<std::size_t>>& inbag,
                                      const ForestOptions& options) {
  check_training_input(z, labels);
  if (inbag.size() != options.trees)
    throw std::invalid_argument("forest_fit: bootstrap list count != tree count");

  ForestModel model;
  model.options = options;
  model.feature_dim = z.cols;
  model.inbag = inbag;
  for (auto& bag : model.inbag) std::sort(bag.begin(), bag.end());  // for OOB lookups
  for (std::size_t t = 0; t < options.trees; ++t) {
    const std::uint64_t tree_seed = derive_seed(seed, "tree-" + std::to_string(t));
    model.tree_seeds.push_back(tree_seed);
    Rng rng(tree_seed);
    TreeBuilder builder{z, labels, options, rng, {}};
    builder.build(model.inbag[t], 0);
    model.trees.push_back(std::move(builder.tree));
  }
  model.trained = true;
  return model;
}

ForestModel forest_fit(const Matrix& z, const std::vector<int>& labels, std::uint64_t seed,
                       const ForestOptions& options) {
  check_training_input(z, labels);
  std::vector<std::vector<std::size_t>> inbag(options.trees);
  for (std::size_t t = 0; t < options.trees; ++t) {
    Rng rng(derive_seed(seed, "bootstrap-" + std::to_string(t)));
    if (options.bootstrap) {
      inbag[t].resize(z.rows);
      for (std::size_t i = 0; i < z.rows; ++i) inbag[t][i] = rng.index(z.rows);
      std::sort(inbag[t].begin(), inbag[t].end());
    } else {
      inbag[t].resize(z.rows);
      for (std::size_t i = 0; i < z.rows; ++i) inbag[t][i] = i;
    }
  }
  return forest_fit_with_bootstrap(z, labels, seed, inbag, options);
}

std::vector<double> forest_predict_proba(const ForestModel& model, const Matrix& z) {
  if (!model.trained) throw std::invalid_argument("forest_predict_proba: model is not trained");
  if (z.cols != model.feature_dim)
    throw ShapeError("forest_predict_proba: feature width mismatch");
  std::vector<double> out(z.rows, 0.0);
  for (std::size_t k = 0; k < z.rows; ++k) {
    double acc = 0.0;
    for (const DecisionTree& tree : model.trees) acc += tree.predict_proba(z.row(k));
    out[k] = acc / static_cast<double>(model.trees.size());
  }
  return out;
}

double forest_oob_accuracy(const ForestModel& model, const Matrix& z,
                           const std::vector<int>& labels) {
  std::size_t correct = 0, considered = 0;
  for (std::size_t k = 0; k < z.rows; ++k) {
    double acc = 0.0;
    std::size_t votes = 0;
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
      if (std::binary_search(model.inbag[t].begin(), model.inbag[t].end(), k)) continue;
      acc += model.trees[t].predict_proba(z.row(k));
      ++votes;
    }
    if (votes == 0) continue;
    ++considered;
    const int predicted = acc / static_cast<double>(votes) >= 0.5 ? 1 : 0;
    correct += static_cast<std::size_t>(predicted == labels[k]);
  }
  return considered == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(considered);
}

}  // namespace deconfuse
