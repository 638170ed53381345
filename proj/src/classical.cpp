#include "ecglens/classical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

namespace ecglens::classical {

namespace {

using Counts = std::array<std::uint32_t, kNumClasses>;

void check_inputs(const FeatureMatrix& x, std::span<const int> y) {
  if (x.rows == 0) throw Error(ErrorCode::Data, "fit: no samples");
  if (x.cols == 0) throw Error(ErrorCode::Data, "fit: no features");
  if (x.values.size() != x.rows * x.cols) throw Error(ErrorCode::Data, "fit: feature matrix size mismatch");
  if (y.size() != x.rows)
    throw Error(ErrorCode::Data, "fit: " + std::to_string(x.rows) + " rows but " + std::to_string(y.size()) + " labels");
  for (int label : y) {
    if (label < 0 || label >= static_cast<int>(kNumClasses))
      throw Error(ErrorCode::Data, "fit: label " + std::to_string(label) + " outside 0-4");
  }
}

double sum_sq_over_n(const Counts& c, std::uint32_t n) {
  if (n == 0) return 0.0;
  double s = 0.0;
  for (auto v : c) s += static_cast<double>(v) * static_cast<double>(v);
  return s / static_cast<double>(n);
}

bool is_pure(const Counts& c) {
  int nonzero = 0;
  for (auto v : c) nonzero += v > 0;
  return nonzero <= 1;
}

Prediction from_distribution(const std::array<double, kNumClasses>& probs) {
  Prediction p;
  p.probabilities = probs;
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (probs[c] > probs[best]) best = c;
  }
  p.label = static_cast<Superclass>(best);
  return p;
}

// Grows one tree over `slots` (row ids, repeated under bootstrap). When every
// feature is a candidate, per-feature orderings are sorted once and
// partitioned stably at each split; otherwise candidates are sorted per node.
class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const int> y, const TreeParams& p, std::size_t features_per_split,
              Rng& rng)
      : x_(x), y_(y), params_(p), mtry_(features_per_split), rng_(rng) {}

  DecisionTree build(std::vector<std::uint32_t> slots) {
    slots_ = std::move(slots);
    const std::size_t n = slots_.size();
    presorted_ = mtry_ >= x_.cols;
    if (presorted_) {
      sorted_.assign(x_.cols, {});
      std::vector<std::uint32_t> positions(n);
      std::iota(positions.begin(), positions.end(), 0u);
      for (std::size_t f = 0; f < x_.cols; ++f) {
        auto& order = sorted_[f];
        order = positions;
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
          const float va = value(a, f), vb = value(b, f);
          return va < vb || (va == vb && a < b);
        });
      }
    }
    members_.resize(n);
    std::iota(members_.begin(), members_.end(), 0u);
    goes_left_.assign(n, 0);

    DecisionTree tree;
    tree.n_features = x_.cols;
    struct Work {
      std::size_t begin, end;
      int depth;
      int node;
    };
    tree.nodes.emplace_back();
    std::vector<Work> stack = {{0, n, 0, 0}};
    while (!stack.empty()) {
      const Work w = stack.back();
      stack.pop_back();
      TreeNode& node = tree.nodes[static_cast<std::size_t>(w.node)];
      node.class_counts = count(w.begin, w.end);

      const auto split = find_split(w.begin, w.end, w.depth, node.class_counts);
      if (!split) continue;

      node.feature = static_cast<int>(split->feature);
      node.threshold = split->threshold;
      const std::size_t mid = partition(w.begin, w.end, split->feature, split->threshold);
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      tree.nodes[static_cast<std::size_t>(w.node)].left = left;
      tree.nodes[static_cast<std::size_t>(w.node)].right = left + 1;
      // Right pushed first so the left subtree is expanded first.
      stack.push_back({mid, w.end, w.depth + 1, left + 1});
      stack.push_back({w.begin, mid, w.depth + 1, left});
    }
    return renumber_preorder(tree);
  }

 private:
  struct Split {
    std::size_t feature;
    double threshold;
  };

  float value(std::uint32_t position, std::size_t feature) const {
    return x_.at(slots_[position], feature);
  }
  int label(std::uint32_t position) const { return y_[slots_[position]]; }

  Counts count(std::size_t begin, std::size_t end) const {
    Counts c{};
    for (std::size_t i = begin; i < end; ++i) ++c[static_cast<std::size_t>(label(members_[i]))];
    return c;
  }

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> features(x_.cols);
    std::iota(features.begin(), features.end(), std::size_t{0});
    if (mtry_ >= x_.cols) return features;
    for (std::size_t i = 0; i < mtry_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, x_.cols - 1);
      std::swap(features[i], features[pick(rng_)]);
    }
    features.resize(mtry_);
    std::sort(features.begin(), features.end());
    return features;
  }

  std::optional<Split> find_split(std::size_t begin, std::size_t end, int depth, const Counts& parent) {
    const std::size_t n = end - begin;
    const auto leaf_min = static_cast<std::size_t>(params_.min_samples_leaf);
    if (is_pure(parent) || depth >= params_.max_depth || n < static_cast<std::size_t>(params_.min_samples_split) ||
        n < 2 * leaf_min)
      return std::nullopt;

    // Maximizing sum_c l_c^2/n_l + sum_c r_c^2/n_r minimizes the weighted
    // child Gini impurity. Integer counts make the score identical on both
    // search paths.
    std::optional<Split> best;
    double best_score = -1.0;
    std::vector<std::uint32_t> scratch;
    for (std::size_t f : candidate_features()) {
      std::span<const std::uint32_t> ordered;
      if (presorted_) {
        ordered = std::span<const std::uint32_t>(sorted_[f]).subspan(begin, n);
      } else {
        scratch.assign(members_.begin() + static_cast<std::ptrdiff_t>(begin),
                       members_.begin() + static_cast<std::ptrdiff_t>(end));
        std::sort(scratch.begin(), scratch.end(), [&](std::uint32_t a, std::uint32_t b) {
          const float va = value(a, f), vb = value(b, f);
          return va < vb || (va == vb && a < b);
        });
        ordered = scratch;
      }
      Counts left{};
      Counts right = parent;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto c = static_cast<std::size_t>(label(ordered[i]));
        ++left[c];
        --right[c];
        const std::size_t n_left = i + 1;
        const float here = value(ordered[i], f);
        const float next = value(ordered[i + 1], f);
        if (!(here < next)) continue;
        if (n_left < leaf_min || n - n_left < leaf_min) continue;
        const double score = sum_sq_over_n(left, static_cast<std::uint32_t>(n_left)) +
                             sum_sq_over_n(right, static_cast<std::uint32_t>(n - n_left));
        if (score > best_score) {
          best_score = score;
          best = Split{f, 0.5 * (static_cast<double>(here) + static_cast<double>(next))};
        }
      }
    }
    return best;
  }

  std::size_t partition(std::size_t begin, std::size_t end, std::size_t feature, double threshold) {
    std::size_t n_left = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint32_t pos = members_[i];
      goes_left_[pos] = static_cast<double>(value(pos, feature)) <= threshold;
      n_left += goes_left_[pos];
    }
    auto stable_split = [&](std::vector<std::uint32_t>& v) {
      std::stable_partition(v.begin() + static_cast<std::ptrdiff_t>(begin), v.begin() + static_cast<std::ptrdiff_t>(end),
                            [&](std::uint32_t pos) { return goes_left_[pos] != 0; });
    };
    stable_split(members_);
    if (presorted_) {
      for (auto& order : sorted_) stable_split(order);
    }
    return begin + n_left;
  }

  static DecisionTree renumber_preorder(const DecisionTree& tree) {
    DecisionTree out;
    out.n_features = tree.n_features;
    out.nodes.reserve(tree.nodes.size());
    std::vector<std::pair<int, int>> stack = {{0, -1}};  // (old index, parent slot)
    std::vector<std::pair<int, bool>> parent_links;
    while (!stack.empty()) {
      auto [old, parent] = stack.back();
      stack.pop_back();
      const int index = static_cast<int>(out.nodes.size());
      out.nodes.push_back(tree.nodes[static_cast<std::size_t>(old)]);
      if (parent >= 0) {
        auto& p = out.nodes[static_cast<std::size_t>(parent)];
        if (p.left == -2) {
          p.left = index;
        } else {
          p.right = index;
        }
      }
      TreeNode& node = out.nodes.back();
      if (!node.is_leaf()) {
        const int old_left = node.left, old_right = node.right;
        node.left = -2;
        node.right = -2;
        stack.push_back({old_right, index});
        stack.push_back({old_left, index});
      }
    }
    return out;
  }

  const FeatureMatrix& x_;
  std::span<const int> y_;
  TreeParams params_;
  std::size_t mtry_;
  Rng& rng_;
  bool presorted_ = false;
  std::vector<std::uint32_t> slots_;
  std::vector<std::uint32_t> members_;
  std::vector<std::vector<std::uint32_t>> sorted_;
  std::vector<unsigned char> goes_left_;
};

std::vector<std::uint32_t> all_rows(std::size_t n) {
  std::vector<std::uint32_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0u);
  return rows;
}

}  // namespace

void validate(const TreeParams& p) {
  if (p.max_depth < 1 || p.min_samples_leaf < 1 || p.min_samples_split < 1)
    throw Error(ErrorCode::Config, "tree params: max_depth, min_samples_leaf and min_samples_split must be >= 1");
}

int DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  int deepest = 0;
  std::vector<std::pair<int, int>> stack = {{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    const auto& n = nodes[static_cast<std::size_t>(i)];
    if (!n.is_leaf()) {
      stack.push_back({n.left, d + 1});
      stack.push_back({n.right, d + 1});
    }
  }
  return deepest;
}

DecisionTree fit_tree(const FeatureMatrix& x, std::span<const int> y, const TreeParams& p, Rng& rng) {
  check_inputs(x, y);
  validate(p);
  TreeBuilder builder(x, y, p, x.cols, rng);
  return builder.build(all_rows(x.rows));
}

Prediction predict_tree(const DecisionTree& tree, std::span<const float> x) {
  if (x.size() != tree.n_features)
    throw Error(ErrorCode::Data, "predict: expected " + std::to_string(tree.n_features) + " features, got " +
                                     std::to_string(x.size()));
  if (tree.nodes.empty()) throw Error(ErrorCode::Data, "predict: empty tree");
  const TreeNode* node = &tree.nodes.front();
  while (!node->is_leaf()) {
    const bool left = static_cast<double>(x[static_cast<std::size_t>(node->feature)]) <= node->threshold;
    node = &tree.nodes[static_cast<std::size_t>(left ? node->left : node->right)];
  }
  double total = 0.0;
  for (auto c : node->class_counts) total += c;
  std::array<double, kNumClasses> probs{};
  for (std::size_t c = 0; c < kNumClasses; ++c) probs[c] = total > 0 ? node->class_counts[c] / total : 0.2;
  return from_distribution(probs);
}

ForestModel fit_forest(const FeatureMatrix& x, std::span<const int> y, int n_trees, const TreeParams& p, Rng& rng,
                       const ForestOptions& options) {
  check_inputs(x, y);
  validate(p);
  if (n_trees < 1) throw Error(ErrorCode::Config, "forest: n_trees must be >= 1");

  ForestModel model;
  model.seed = rng();
  model.bootstrap = options.bootstrap;
  std::size_t mtry = options.features_per_split > 0
                         ? static_cast<std::size_t>(options.features_per_split)
                         : static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(x.cols))));
  mtry = std::clamp<std::size_t>(mtry, 1, x.cols);
  model.n_features_per_split = static_cast<int>(mtry);

  for (int t = 0; t < n_trees; ++t) {
    Rng tree_rng(derive_seed(model.seed, {static_cast<std::uint64_t>(t)}));
    std::vector<std::uint32_t> rows;
    if (options.bootstrap) {
      std::uniform_int_distribution<std::uint32_t> draw(0, static_cast<std::uint32_t>(x.rows - 1));
      rows.resize(x.rows);
      for (auto& r : rows) r = draw(tree_rng);
    } else {
      rows = all_rows(x.rows);
    }
    TreeBuilder builder(x, y, p, mtry, tree_rng);
    model.trees.push_back(builder.build(std::move(rows)));
  }
  return model;
}

Prediction predict_forest(const ForestModel& model, std::span<const float> x) {
  if (model.trees.empty()) throw Error(ErrorCode::Data, "predict: forest has no trees");
  std::array<double, kNumClasses> votes{};
  for (const auto& tree : model.trees) votes[static_cast<std::size_t>(predict_tree(tree, x).label)] += 1.0;
  for (auto& v : votes) v /= static_cast<double>(model.trees.size());
  return from_distribution(votes);
}

LogisticModel zero_logistic(std::size_t n_features) {
  LogisticModel m;
  m.n_features = n_features;
  m.weights.assign(kNumClasses * n_features, 0.0);
  return m;
}

namespace {

std::array<double, kNumClasses> logits(const LogisticModel& m, std::span<const float> x) {
  std::array<double, kNumClasses> z = m.biases;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double* w = m.weights.data() + c * m.n_features;
    double s = 0.0;
    for (std::size_t j = 0; j < m.n_features; ++j) s += w[j] * static_cast<double>(x[j]);
    z[c] += s;
  }
  return z;
}

std::array<double, kNumClasses> softmax(const std::array<double, kNumClasses>& z) {
  const double peak = *std::max_element(z.begin(), z.end());
  std::array<double, kNumClasses> p{};
  double sum = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) sum += (p[c] = std::exp(z[c] - peak));
  for (auto& v : p) v /= sum;
  return p;
}

}  // namespace

double logistic_objective(const LogisticModel& m, const FeatureMatrix& x, std::span<const int> y,
                          std::span<const std::size_t> rows, double l2, LogisticModel* grad) {
  if (grad) *grad = zero_logistic(m.n_features);
  const double inv_n = rows.empty() ? 0.0 : 1.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  for (std::size_t r : rows) {
    const auto xr = x.row(r);
    const auto z = logits(m, xr);
    const double peak = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - peak);
    const auto target = static_cast<std::size_t>(y[r]);
    loss += (peak + std::log(sum) - z[target]) * inv_n;
    if (!grad) continue;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const double delta = (std::exp(z[c] - peak) / sum - (c == target ? 1.0 : 0.0)) * inv_n;
      grad->biases[c] += delta;
      double* g = grad->weights.data() + c * m.n_features;
      for (std::size_t j = 0; j < m.n_features; ++j) g[j] += delta * static_cast<double>(xr[j]);
    }
  }
  double sq = 0.0;
  for (double w : m.weights) sq += w * w;
  loss += 0.5 * l2 * sq;
  if (grad) {
    for (std::size_t i = 0; i < m.weights.size(); ++i) grad->weights[i] += l2 * m.weights[i];
  }
  return loss;
}

LogisticModel fit_logistic(const FeatureMatrix& x, std::span<const int> y, const LogisticParams& p, Rng& rng) {
  check_inputs(x, y);
  if (p.batch < 1 || p.epochs < 0 || !(p.lr > 0.0) || p.l2 < 0.0)
    throw Error(ErrorCode::Config, "logistic: require lr > 0, batch >= 1, epochs >= 0, l2 >= 0");

  LogisticModel model = zero_logistic(x.cols);
  LogisticModel grad;
  std::vector<std::size_t> order(x.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= p.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(p.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(p.batch));
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      const double loss = logistic_objective(model, x, y, batch, p.l2, &grad);
      if (!std::isfinite(loss))
        throw Error(ErrorCode::Training, "logistic regression diverged (non-finite loss) in epoch " +
                                             std::to_string(epoch));
      for (std::size_t i = 0; i < model.weights.size(); ++i) model.weights[i] -= p.lr * grad.weights[i];
      for (std::size_t c = 0; c < kNumClasses; ++c) model.biases[c] -= p.lr * grad.biases[c];
    }
  }
  return model;
}

Prediction predict_logistic(const LogisticModel& m, std::span<const float> x) {
  if (x.size() != m.n_features)
    throw Error(ErrorCode::Data, "predict: expected " + std::to_string(m.n_features) + " features, got " +
                                     std::to_string(x.size()));
  return from_distribution(softmax(logits(m, x)));
}

}  // namespace ecglens::classical
