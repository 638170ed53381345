#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "ecglens/common.hpp"
#include "ecglens/ingest.hpp"

namespace ecglens::classical {

/// Dense row-major feature matrix. Single precision keeps the flattened
/// 12000-wide PTB-XL design matrix within a desk machine's memory.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0f) {}

  std::span<const float> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  std::span<float> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  float& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  float at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

struct Prediction {
  Superclass label = Superclass::NORM;
  std::array<double, kNumClasses> probabilities{};
};

struct TreeParams {
  int max_depth = 20;
  int min_samples_leaf = 5;
  int min_samples_split = 10;
};

void validate(const TreeParams& p);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::array<std::uint32_t, kNumClasses> class_counts{};

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Nodes in preorder; nodes[0] is the root.
struct DecisionTree {
  std::size_t n_features = 0;
  std::vector<TreeNode> nodes;

  int depth() const;
  bool operator==(const DecisionTree&) const = default;
};

/// CART with Gini impurity. Thresholds sit at midpoints between consecutive
/// distinct sorted values; every feature is searched exactly. Ties go to the
/// lowest feature index, then the lowest threshold.
DecisionTree fit_tree(const FeatureMatrix& x, std::span<const int> y, const TreeParams& p, Rng& rng);

/// Goes left iff x[feature] <= threshold.
Prediction predict_tree(const DecisionTree& tree, std::span<const float> x);

struct ForestOptions {
  bool bootstrap = true;
  int features_per_split = 0;  // 0 selects floor(sqrt(d))
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  int n_features_per_split = 0;
  std::uint64_t seed = 0;
  bool bootstrap = true;

  bool operator==(const ForestModel&) const = default;
};

/// Tree t trains on its own bootstrap sample drawn from a generator seeded
/// with (seed, t), where seed is taken from `rng`.
ForestModel fit_forest(const FeatureMatrix& x, std::span<const int> y, int n_trees, const TreeParams& p, Rng& rng,
                       const ForestOptions& options = {});

/// Probabilities are hard-vote fractions.
Prediction predict_forest(const ForestModel& model, std::span<const float> x);

struct LogisticParams {
  double lr = 0.01;
  int epochs = 50;
  int batch = 64;
  double l2 = 1e-4;
};

/// Multinomial softmax regression, weights row-major 5 x d.
struct LogisticModel {
  std::size_t n_features = 0;
  std::vector<double> weights;
  std::array<double, kNumClasses> biases{};

  bool operator==(const LogisticModel&) const = default;
};

LogisticModel zero_logistic(std::size_t n_features);

/// Mean cross-entropy over `rows` plus (l2 / 2) * ||W||^2. When `grad` is
/// given it receives the gradient (same layout as the model).
double logistic_objective(const LogisticModel& m, const FeatureMatrix& x, std::span<const int> y,
                          std::span<const std::size_t> rows, double l2, LogisticModel* grad);

/// Mini-batch gradient descent from zero weights with seeded shuffling.
/// Throws Error(Training) naming the epoch if the loss becomes non-finite.
LogisticModel fit_logistic(const FeatureMatrix& x, std::span<const int> y, const LogisticParams& p, Rng& rng);

Prediction predict_logistic(const LogisticModel& m, std::span<const float> x);

}  // namespace ecglens::classical
