#include "eventcast/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "text.hpp"

namespace eventcast::ensemble {

namespace {

// Splits must lower impurity by more than this to count.
constexpr double kMinDecrease = 1e-12;

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double decrease = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, std::span<const int> y, const TreeOptions& options, Rng& rng)
      : X_(X), y_(y), options_(options), rng_(rng) {
    subspace_ = options.subspace == 0 ? X.cols() : std::min(options.subspace, X.cols());
    features_.resize(X.cols());
    std::iota(features_.begin(), features_.end(), 0);
  }

  Tree build(std::vector<std::size_t> rows) {
    if (rows.empty()) throw std::invalid_argument("tree_train: no rows");
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> rows, std::size_t depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double pos = 0.0;
    for (auto r : rows) pos += y_[r] ? 1.0 : 0.0;
    const double n = static_cast<double>(rows.size());
    tree_.nodes[id].p1 = pos / n;
    if (pos == 0.0 || pos == n) return id;
    if (options_.max_depth != 0 && depth >= options_.max_depth) return id;

    const auto split = best_split(rows, n - pos, pos);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows)
      (X_(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    tree_.nodes[id].feature = split.feature;
    tree_.nodes[id].threshold = split.threshold;
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    tree_.nodes[id].left = l;
    tree_.nodes[id].right = r;
    return id;
  }

  std::vector<std::size_t> draw_features() {
    if (subspace_ == features_.size()) return features_;
    for (std::size_t i = 0; i < subspace_; ++i)
      std::swap(features_[i], features_[i + rng_.below(features_.size() - i)]);
    std::vector<std::size_t> chosen(features_.begin(), features_.begin() + subspace_);
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  SplitChoice best_split(const std::vector<std::size_t>& rows, double neg, double pos) {
    const double n = neg + pos;
    const double parent = gini(neg, pos);
    SplitChoice best;
    std::vector<std::pair<double, int>> values(rows.size());
    for (auto f : draw_features()) {
      for (std::size_t i = 0; i < rows.size(); ++i) values[i] = {X_(rows[i], f), y_[rows[i]]};
      std::sort(values.begin(), values.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      if (values.front().first == values.back().first) continue;
      double left_pos = 0.0, left_n = 0.0;
      for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        left_n += 1.0;
        left_pos += values[i].second ? 1.0 : 0.0;
        const double a = values[i].first;
        const double b = values[i + 1].first;
        if (a == b) continue;
        const double right_n = n - left_n;
        const double right_pos = pos - left_pos;
        const double child = (left_n * gini(left_n - left_pos, left_pos) +
                              right_n * gini(right_n - right_pos, right_pos)) / n;
        const double decrease = parent - child;
        if (decrease > kMinDecrease && decrease > best.decrease) {
          double threshold = a + (b - a) / 2.0;
          if (!(threshold < b)) threshold = a;
          best = {static_cast<int>(f), threshold, decrease};
        }
      }
    }
    return best;
  }

  const Matrix& X_;
  std::span<const int> y_;
  TreeOptions options_;
  Rng& rng_;
  std::size_t subspace_ = 0;
  std::vector<std::size_t> features_;
  Tree tree_;
};

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

// Inverse-CDF draw of n indices from a discrete distribution.
std::vector<std::size_t> weighted_bootstrap(std::span<const double> w, Rng& rng) {
  std::vector<double> cdf(w.size());
  std::partial_sum(w.begin(), w.end(), cdf.begin());
  const double total = cdf.back();
  std::vector<std::size_t> out(w.size());
  for (auto& o : out) {
    const double u = rng.uniform() * total;
    o = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    if (o >= w.size()) o = w.size() - 1;
  }
  return out;
}

int vote(const Tree& stump, std::span<const double> x) { return stump.predict(x) > 0.5 ? 1 : -1; }

void write_tree(std::ostringstream& out, const Tree& t) {
  out << "tree " << t.nodes.size() << "\n";
  for (const auto& n : t.nodes)
    out << n.feature << ' ' << text::shortest(n.threshold) << ' ' << n.left << ' ' << n.right << ' '
        << text::shortest(n.p1) << "\n";
}

Tree read_tree(std::istringstream& in) {
  std::string tag;
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "tree") throw std::runtime_error("checkpoint: expected tree");
  Tree t;
  t.nodes.resize(count);
  for (auto& n : t.nodes) {
    std::string threshold, p1;
    if (!(in >> n.feature >> threshold >> n.left >> n.right >> p1))
      throw std::runtime_error("checkpoint: truncated tree");
    n.threshold = text::to_double(threshold).value();
    n.p1 = text::to_double(p1).value();
  }
  return t;
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double gini(double negatives, double positives) {
  const double n = negatives + positives;
  if (n <= 0.0) return 0.0;
  const double p0 = negatives / n;
  const double p1 = positives / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

double gini(std::span<const int> labels) {
  if (labels.empty()) throw std::invalid_argument("gini: empty label set");
  const auto pos = static_cast<double>(std::count_if(labels.begin(), labels.end(),
                                                     [](int v) { return v != 0; }));
  return gini(static_cast<double>(labels.size()) - pos, pos);
}

double Tree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf())
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold
                                     ? nodes[i].left
                                     : nodes[i].right);
  return nodes[i].p1;
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (!nodes[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

std::size_t Tree::leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

Tree tree_train(const Matrix& X, std::span<const int> y, std::span<const std::size_t> rows,
                const TreeOptions& options, Rng& rng) {
  if (y.size() != X.rows()) throw std::invalid_argument("tree_train: label length mismatch");
  return TreeBuilder(X, y, options, rng).build({rows.begin(), rows.end()});
}

Tree tree_train(const Matrix& X, std::span<const int> y, const TreeOptions& options, Rng& rng) {
  return tree_train(X, y, all_rows(X.rows()), options, rng);
}

double ForestModel::predict(std::span<const double> x) const {
  if (trees.empty()) throw std::logic_error("forest has no trees");
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(x);
  return sum / static_cast<double>(trees.size());
}

std::vector<double> ForestModel::predict(const Matrix& X) const {
  std::vector<double> out(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) out[r] = predict(X.row(r));
  return out;
}

ForestModel rf_train(const Matrix& X, std::span<const int> y, const ForestConfig& config) {
  if (config.estimators == 0) throw std::invalid_argument("rf_train: estimators must be >= 1");
  if (X.rows() == 0) throw std::invalid_argument("rf_train: no rows");
  ForestModel model;
  model.features = X.cols();
  model.seed = config.seed;
  model.bootstrap = config.bootstrap;
  model.subspace = config.subspace != 0
                       ? config.subspace
                       : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(X.cols()))));
  model.trees.resize(config.estimators);
  model.tree_seeds.resize(config.estimators);
  for (std::size_t t = 0; t < config.estimators; ++t) model.tree_seeds[t] = mix_seed(config.seed, t);

  const TreeOptions options{model.subspace, 0};
  parallel_for(config.estimators, config.threads, [&](std::size_t t) {
    Rng rng(model.tree_seeds[t]);
    std::vector<std::size_t> rows(X.rows());
    if (config.bootstrap) {
      for (auto& r : rows) r = rng.below(X.rows());
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    model.trees[t] = tree_train(X, y, rows, options, rng);
  });
  return model;
}

double ada_alpha(double eps) {
  if (eps <= 0.0) return kMaxAlpha;
  return std::min(kMaxAlpha, 0.5 * std::log((1.0 - eps) / eps));
}

double BoostModel::predict(std::span<const double> x) const {
  double margin = 0.0, total = 0.0;
  for (std::size_t t = 0; t < stumps.size(); ++t) {
    margin += alphas[t] * vote(stumps[t], x);
    total += alphas[t];
  }
  return total > 0.0 ? logistic(margin / total) : 0.5;
}

std::vector<double> BoostModel::predict(const Matrix& X) const {
  std::vector<double> out(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) out[r] = predict(X.row(r));
  return out;
}

BoostModel ada_train(const Matrix& X, std::span<const int> y, const BoostConfig& config,
                     std::vector<BoostStep>* trace) {
  const std::size_t n = X.rows();
  if (n == 0) throw std::invalid_argument("ada_train: no rows");
  if (y.size() != n) throw std::invalid_argument("ada_train: label length mismatch");
  BoostModel model;
  model.iterations = config.iterations;
  model.seed = config.seed;
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  const TreeOptions stump{0, 1};

  for (std::size_t it = 0; it < config.iterations; ++it) {
    Rng rng(mix_seed(config.seed, it));
    const auto sample = weighted_bootstrap(w, rng);
    Tree tree = tree_train(X, y, sample, stump, rng);

    std::vector<char> wrong(n);
    double eps = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      wrong[i] = (vote(tree, X.row(i)) == 1) != (y[i] == 1);
      if (wrong[i]) eps += w[i];
    }
    BoostStep step{eps, 0.0, false, 0.0, 0.0, 0.0};
    if (eps >= 0.5) {
      if (trace) {
        step.weight_sum = std::accumulate(w.begin(), w.end(), 0.0);
        step.min_weight = *std::min_element(w.begin(), w.end());
        trace->push_back(step);
      }
      continue;
    }
    const double alpha = ada_alpha(eps);
    model.stumps.push_back(std::move(tree));
    model.alphas.push_back(alpha);
    step.alpha = alpha;
    step.kept = true;

    const double up = std::exp(alpha), down = std::exp(-alpha);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] *= wrong[i] ? up : down;
      total += w[i];
    }
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] /= total;
      if (wrong[i]) mass += w[i];
    }
    if (trace) {
      step.weight_sum = std::accumulate(w.begin(), w.end(), 0.0);
      step.misclassified_mass = mass;
      step.min_weight = *std::min_element(w.begin(), w.end());
      trace->push_back(step);
    }
    if (eps <= 0.0) break;
  }
  return model;
}

SmoteResult smote(const Matrix& minority, std::size_t count, const SmoteConfig& config) {
  const std::size_t n = minority.rows();
  if (n < 2) throw std::invalid_argument("smote: need at least two minority rows");
  if (config.k_neighbors < 1) throw std::invalid_argument("smote: k must be >= 1");
  const std::size_t k = std::min(config.k_neighbors, n - 1);

  std::vector<std::vector<std::size_t>> neighbours(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < minority.cols(); ++c) {
        const double diff = minority(i, c) - minority(j, c);
        s += diff * diff;
      }
      d.emplace_back(s, j);
    }
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    for (std::size_t q = 0; q < k; ++q) neighbours[i].push_back(d[q].second);
  }

  Rng rng(config.seed);
  SmoteResult out{Matrix(count, minority.cols()), {}};
  out.parents.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t base = s % n;
    const std::size_t nn = neighbours[base][rng.below(k)];
    const double u = rng.uniform();
    for (std::size_t c = 0; c < minority.cols(); ++c)
      out.synthetic(s, c) = minority(base, c) + u * (minority(nn, c) - minority(base, c));
    out.parents.emplace_back(base, nn);
  }
  return out;
}

Balanced smote_balance(const Matrix& X, std::span<const int> y, const SmoteConfig& config) {
  if (y.size() != X.rows()) throw std::invalid_argument("smote_balance: label length mismatch");
  Balanced out{X, {y.begin(), y.end()}, {}, 0};
  for (std::size_t i = 0; i < X.rows(); ++i) out.origin.emplace_back(i, i);

  std::size_t pos = 0;
  for (int v : y) pos += v ? 1 : 0;
  const std::size_t neg = y.size() - pos;
  const int minority_label = pos <= neg ? 1 : 0;
  const std::size_t n_min = std::min(pos, neg), n_maj = std::max(pos, neg);
  const auto target = static_cast<std::size_t>(std::llround(config.target_ratio * static_cast<double>(n_maj)));
  if (n_min < 2 || target <= n_min) return out;

  std::vector<std::size_t> minority_rows;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] == minority_label) minority_rows.push_back(i);
  const auto res = smote(X.select_rows(minority_rows), target - n_min, config);
  for (std::size_t s = 0; s < res.synthetic.rows(); ++s) {
    out.X.append_row(res.synthetic.row(s));
    out.y.push_back(minority_label);
    out.origin.emplace_back(minority_rows[res.parents[s].first], minority_rows[res.parents[s].second]);
  }
  out.synthetic = res.synthetic.rows();
  return out;
}

std::string save_forest(const ForestModel& model) {
  std::ostringstream out;
  out << "eventcast-forest v1\n"
      << "features " << model.features << "\nsubspace " << model.subspace << "\nseed " << model.seed
      << "\nbootstrap " << (model.bootstrap ? 1 : 0) << "\ntrees " << model.trees.size() << "\n";
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    out << "tree_seed " << model.tree_seeds[t] << "\n";
    write_tree(out, model.trees[t]);
  }
  return out.str();
}

ForestModel load_forest(const std::string& content) {
  std::istringstream in(content);
  std::string magic, version, key;
  if (!(in >> magic >> version) || magic != "eventcast-forest" || version != "v1")
    throw std::runtime_error("not an eventcast-forest v1 checkpoint");
  ForestModel m;
  int bootstrap = 1;
  std::size_t count = 0;
  in >> key >> m.features >> key >> m.subspace >> key >> m.seed >> key >> bootstrap >> key >> count;
  if (!in) throw std::runtime_error("checkpoint: bad forest header");
  m.bootstrap = bootstrap != 0;
  for (std::size_t t = 0; t < count; ++t) {
    std::uint64_t s = 0;
    if (!(in >> key >> s) || key != "tree_seed") throw std::runtime_error("checkpoint: bad tree seed");
    m.tree_seeds.push_back(s);
    m.trees.push_back(read_tree(in));
  }
  return m;
}

std::string save_boost(const BoostModel& model) {
  std::ostringstream out;
  out << "eventcast-boost v1\niterations " << model.iterations << "\nseed " << model.seed
      << "\nstumps " << model.stumps.size() << "\n";
  for (std::size_t t = 0; t < model.stumps.size(); ++t) {
    out << "alpha " << text::shortest(model.alphas[t]) << "\n";
    write_tree(out, model.stumps[t]);
  }
  return out.str();
}

BoostModel load_boost(const std::string& content) {
  std::istringstream in(content);
  std::string magic, version, key;
  if (!(in >> magic >> version) || magic != "eventcast-boost" || version != "v1")
    throw std::runtime_error("not an eventcast-boost v1 checkpoint");
  BoostModel m;
  std::size_t count = 0;
  in >> key >> m.iterations >> key >> m.seed >> key >> count;
  if (!in) throw std::runtime_error("checkpoint: bad boost header");
  for (std::size_t t = 0; t < count; ++t) {
    std::string alpha;
    if (!(in >> key >> alpha) || key != "alpha") throw std::runtime_error("checkpoint: bad alpha");
    m.alphas.push_back(text::to_double(alpha).value());
    m.stumps.push_back(read_tree(in));
  }
  return m;
}

}  // namespace eventcast::ensemble
