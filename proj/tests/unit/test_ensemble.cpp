#include <gtest/gtest.h>

#include <cmath>

#include "eventcast/ensemble.hpp"

using namespace eventcast;
using namespace eventcast::ensemble;

namespace {

Matrix random_matrix(Rng& r, std::size_t n, std::size_t m) {
  Matrix X(n, m);
  for (auto& v : X.data()) v = r.normal();
  return X;
}

double accuracy(const Tree& t, const Matrix& X, const std::vector<int>& y) {
  double ok = 0;
  for (std::size_t i = 0; i < X.rows(); ++i) ok += (t.predict(X.row(i)) >= 0.5) == (y[i] == 1);
  return ok / X.rows();
}

}  // namespace

TEST(Gini, Examples) {
  EXPECT_EQ(gini(std::vector<int>{1, 1, 1, 1}), 0.0);
  EXPECT_EQ(gini(std::vector<int>{0, 0, 1, 1}), 0.5);
  EXPECT_EQ(gini(std::vector<int>{0, 1, 1, 1}), 0.375);
}

TEST(Tree, SeparableOneDimensional) {
  Matrix X(6, 1);
  std::vector<int> y{0, 0, 0, 1, 1, 1};
  for (int i = 0; i < 6; ++i) X(i, 0) = i;
  Rng r(1);
  auto t = tree_train(X, y, {}, r);
  EXPECT_EQ(t.depth(), 1u);
  EXPECT_EQ(accuracy(t, X, y), 1.0);
  EXPECT_EQ(t.nodes[0].threshold, 2.5);
}

TEST(Tree, ConstantInputIsPriorLeaf) {
  Matrix X(4, 2, 3.0);
  std::vector<int> y{0, 1, 1, 1};
  Rng r(1);
  auto t = tree_train(X, y, {}, r);
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_EQ(t.nodes[0].p1, 0.75);
}

TEST(Tree, XorNeedsDepthTwo) {
  Matrix X(8, 2);
  std::vector<int> y(8);
  const double pts[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  for (int i = 0; i < 8; ++i) {
    X(i, 0) = pts[i % 4][0] + 0.01 * i;
    X(i, 1) = pts[i % 4][1];
    y[i] = (pts[i % 4][0] > 0.5) != (pts[i % 4][1] > 0.5);
  }
  Rng r(3);
  auto t = tree_train(X, y, {}, r);
  EXPECT_GE(t.depth(), 2u);
  EXPECT_EQ(accuracy(t, X, y), 1.0);
}

TEST(Forest, SingleTreeReduction) {
  Rng r(4);
  auto X = random_matrix(r, 80, 5);
  std::vector<int> y(80);
  for (std::size_t i = 0; i < 80; ++i) y[i] = X(i, 0) + 0.3 * X(i, 2) > 0;
  auto f = rf_train(X, y, {1, 5, false, 77, 1});
  Rng tr(f.tree_seeds[0]);
  auto t = tree_train(X, y, {5, 0}, tr);
  for (std::size_t i = 0; i < 80; ++i) EXPECT_EQ(f.predict(X.row(i)), t.predict(X.row(i)));
}

TEST(Forest, ThreadCountInvariant) {
  Rng r(5);
  auto X = random_matrix(r, 120, 8);
  std::vector<int> y(120);
  for (std::size_t i = 0; i < 120; ++i) y[i] = X(i, 1) > 0.5;
  auto a = rf_train(X, y, {30, 0, true, 11, 1});
  auto b = rf_train(X, y, {30, 0, true, 11, 8});
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.subspace, 3u);  // ceil(sqrt(8))
  EXPECT_EQ(load_forest(save_forest(a)), a);
}

TEST(AdaBoost, AlphaFormula) {
  EXPECT_DOUBLE_EQ(ada_alpha(0.25), 0.5 * std::log(3.0));
  EXPECT_EQ(ada_alpha(0.0), kMaxAlpha);
}

TEST(AdaBoost, WeightInvariants) {
  Rng r(6);
  auto X = random_matrix(r, 150, 4);
  std::vector<int> y(150);
  for (std::size_t i = 0; i < 150; ++i) y[i] = X(i, 0) * X(i, 1) > 0;
  std::vector<BoostStep> trace;
  auto model = ada_train(X, y, {40, 2}, &trace);
  ASSERT_FALSE(trace.empty());
  std::size_t kept = 0;
  for (const auto& s : trace) {
    EXPECT_NEAR(s.weight_sum, 1.0, 1e-10);
    if (s.kept && s.error > 0) {
      EXPECT_NEAR(s.misclassified_mass, 0.5, 1e-10);
      EXPECT_DOUBLE_EQ(s.alpha, ada_alpha(s.error));
      ++kept;
    }
  }
  EXPECT_EQ(model.stumps.size(), model.alphas.size());
  EXPECT_GT(kept, 0u);
  for (const auto& s : model.stumps) EXPECT_LE(s.depth(), 1u);
  EXPECT_EQ(load_boost(save_boost(model)), model);
  for (std::size_t i = 0; i < 10; ++i) {
    const double p = model.predict(X.row(i));
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(Smote, SegmentProperty) {
  Matrix minority(2, 2);
  minority(1, 0) = minority(1, 1) = 1.0;
  auto s = smote(minority, 50, {1, 1.0, 9});
  ASSERT_EQ(s.synthetic.rows(), 50u);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(s.synthetic(i, 0), s.synthetic(i, 1));
    EXPECT_GE(s.synthetic(i, 0), 0.0);
    EXPECT_LE(s.synthetic(i, 0), 1.0);
  }
  EXPECT_THROW(smote(Matrix(1, 2), 3, {}), std::invalid_argument);
}

TEST(Smote, BalanceBoxAndNeighbourParents) {
  Rng r(12);
  auto X = random_matrix(r, 100, 3);
  std::vector<int> y(100, 0);
  for (int i = 0; i < 9; ++i) y[i * 11] = 1;
  const SmoteConfig cfg{3, 1.0, 5};
  auto b = smote_balance(X, y, cfg);
  EXPECT_EQ(std::count(b.y.begin(), b.y.end(), 1), std::count(b.y.begin(), b.y.end(), 0));
  std::vector<std::size_t> minority;
  for (std::size_t i = 0; i < 100; ++i)
    if (y[i]) minority.push_back(i);
  for (std::size_t k = 100; k < b.X.rows(); ++k) {
    const auto [p, q] = b.origin[k];
    ASSERT_EQ(y[p], 1);
    ASSERT_EQ(y[q], 1);
    // q is among p's 3 nearest minority neighbours.
    auto dist = [&](std::size_t a, std::size_t c) {
      double s = 0;
      for (std::size_t j = 0; j < 3; ++j) s += (X(a, j) - X(c, j)) * (X(a, j) - X(c, j));
      return s;
    };
    std::size_t closer = 0;
    for (auto o : minority)
      if (o != p && dist(p, o) < dist(p, q)) ++closer;
    EXPECT_LT(closer, 3u);
    // On the segment p -> q, hence inside the minority bounding box.
    double lambda = -1;
    for (std::size_t j = 0; j < 3; ++j) {
      const double lo = std::min(X(p, j), X(q, j)), hi = std::max(X(p, j), X(q, j));
      EXPECT_GE(b.X(k, j), lo - 1e-12);
      EXPECT_LE(b.X(k, j), hi + 1e-12);
      if (X(q, j) != X(p, j)) {
        const double l = (b.X(k, j) - X(p, j)) / (X(q, j) - X(p, j));
        if (lambda < 0) lambda = l;
        EXPECT_NEAR(l, lambda, 1e-9);
      }
    }
  }
  auto again = smote_balance(X, y, cfg);
  EXPECT_EQ(again.X, b.X);
}
