#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eventcast/core.hpp"

namespace eventcast::ensemble {

/// 1 - p0^2 - p1^2 for a node holding `negatives` and `positives`.
double gini(double negatives, double positives);
double gini(std::span<const int> labels);

/// Flat binary tree. A node with feature < 0 is a leaf holding P(y = 1).
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  double p1 = 0.0;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const;
  std::size_t depth() const;
  std::size_t leaves() const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

struct TreeOptions {
  std::size_t subspace = 0;   // features drawn per node; 0 = all
  std::size_t max_depth = 0;  // 0 = unlimited (unpruned)
};

/// Grows a Gini tree on X[rows] (rows may repeat, as in a bootstrap). At each
/// node a fresh uniform subset of `subspace` features is drawn; the best
/// midpoint split by weighted Gini decrease wins, ties going to the lowest
/// feature index and then the lowest threshold. A node becomes a leaf when it
/// is pure or no split in its subset lowers impurity.
Tree tree_train(const Matrix& X, std::span<const int> y, std::span<const std::size_t> rows,
                const TreeOptions& options, Rng& rng);
Tree tree_train(const Matrix& X, std::span<const int> y, const TreeOptions& options, Rng& rng);

struct ForestConfig {
  std::size_t estimators = 100;
  std::size_t subspace = 0;  // 0 = ceil(sqrt(m))
  bool bootstrap = true;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct ForestModel {
  std::vector<Tree> trees;
  std::vector<std::uint64_t> tree_seeds;
  std::size_t subspace = 0;
  std::size_t features = 0;
  std::uint64_t seed = 0;
  bool bootstrap = true;

  double predict(std::span<const double> x) const;
  std::vector<double> predict(const Matrix& X) const;
  friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

/// Random forest: each tree sees a bootstrap of n draws (unless disabled) and
/// uses its own RNG stream derived from the master seed, so the result does
/// not depend on the number of threads.
ForestModel rf_train(const Matrix& X, std::span<const int> y, const ForestConfig& config);

struct BoostConfig {
  std::size_t iterations = 100;
  std::uint64_t seed = 0;
};

struct BoostModel {
  std::vector<Tree> stumps;
  std::vector<double> alphas;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;

  /// Logistic of the normalized vote margin sum(alpha h(x)) / sum(alpha).
  double predict(std::span<const double> x) const;
  std::vector<double> predict(const Matrix& X) const;
  friend bool operator==(const BoostModel&, const BoostModel&) = default;
};

/// Largest stump weight; used when a stump makes no weighted error.
inline constexpr double kMaxAlpha = 10.0;

/// Boosting weight for weighted error eps: 0.5 ln((1 - eps) / eps), capped.
double ada_alpha(double eps);

struct BoostStep {
  double error = 0.0;
  double alpha = 0.0;
  bool kept = false;
  double weight_sum = 0.0;          // after the update
  double misclassified_mass = 0.0;  // after the update
  double min_weight = 0.0;
};

/// Resampling AdaBoost with decision stumps. Each iteration draws a bootstrap
/// from the current distribution, fits a stump, measures its weighted error on
/// the full set, and reweights. Stumps with error >= 0.5 are discarded and the
/// next iteration draws a fresh bootstrap. A stump with zero error is kept with
/// kMaxAlpha and ends boosting.
BoostModel ada_train(const Matrix& X, std::span<const int> y, const BoostConfig& config,
                     std::vector<BoostStep>* trace = nullptr);

struct SmoteConfig {
  std::size_t k_neighbors = 5;
  double target_ratio = 1.0;  // minority : majority after oversampling
  std::uint64_t seed = 0;
};

struct SmoteResult {
  Matrix synthetic;
  /// Row indices (into the minority matrix) of each synthetic row's endpoints.
  std::vector<std::pair<std::size_t, std::size_t>> parents;
};

/// `count` synthetic rows x_i + u (x_nn - x_i), u ~ U[0,1], x_nn among the k
/// nearest minority neighbours of x_i. Base rows are visited round-robin.
/// k shrinks to |minority| - 1. Throws when |minority| < 2.
SmoteResult smote(const Matrix& minority, std::size_t count, const SmoteConfig& config);

struct Balanced {
  Matrix X;
  std::vector<int> y;
  /// For each output row: the source row in the input, or for synthetic rows
  /// the two source rows it was interpolated between.
  std::vector<std::pair<std::size_t, std::size_t>> origin;
  std::size_t synthetic = 0;
};

/// Appends SMOTE rows for the minority class of (X, y) until minority /
/// majority reaches the target ratio. No-op if fewer than two minority rows.
Balanced smote_balance(const Matrix& X, std::span<const int> y, const SmoteConfig& config);

/// Self-describing text checkpoints with a version tag.
std::string save_forest(const ForestModel& model);
ForestModel load_forest(const std::string& text);
std::string save_boost(const BoostModel& model);
BoostModel load_boost(const std::string& text);

}  // namespace eventcast::ensemble
