#include "eventcast/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace eventcast::stats {

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  constexpr double kEps = 1e-17;
  if (lambda < 1.18) {
    // Jacobi theta form of the CDF converges quickly for small lambda.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double w = std::sqrt(2.0 * std::numbers::pi) / lambda;
    double cdf = 0.0;
    for (int k = 1; k <= 200; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
      cdf += term;
      if (term < kEps) break;
    }
    return std::clamp(1.0 - w * cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    if (term < kEps) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());

  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  // Once one sample is exhausted the gap only shrinks toward zero.

  const double ne = na * nb / (na + nb);
  double p = kolmogorov_survival(std::sqrt(ne) * d);
  p = std::clamp(p, std::numeric_limits<double>::min(), 1.0);
  return {d, p};
}

std::vector<double> midranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto l, auto r) { return x[l] < x[r]; });
  std::vector<double> rank(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = r;
    i = j;
  }
  return rank;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("spearman: need at least two points");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  const double mx = mean(rx);
  const double my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double chi_square_survival(double x, double dof) {
  if (dof <= 0.0) throw std::invalid_argument("chi_square_survival: dof must be positive");
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

std::optional<HTestResult> kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw std::invalid_argument("kruskal_wallis: need at least two groups");
  std::vector<double> pooled;
  for (const auto& g : groups) {
    if (g.empty()) throw std::invalid_argument("kruskal_wallis: empty group");
    pooled.insert(pooled.end(), g.begin(), g.end());
  }
  const double n = static_cast<double>(pooled.size());
  if (pooled.size() < 3) throw std::invalid_argument("kruskal_wallis: need N >= 3");

  const auto ranks = midranks(pooled);
  double between = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double rsum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) rsum += ranks[offset + i];
    between += rsum * rsum / static_cast<double>(g.size());
    offset += g.size();
  }

  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double ties = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    ties += t * t * t - t;
    i = j;
  }
  const double correction = 1.0 - ties / (n * n * n - n);
  if (correction <= 0.0) return std::nullopt;

  double h = 12.0 / (n * (n + 1.0)) * between - 3.0 * (n + 1.0);
  h = std::max(0.0, h / correction);
  const double dof = static_cast<double>(groups.size() - 1);
  const double p = std::clamp(chi_square_survival(h, dof), std::numeric_limits<double>::min(), 1.0);
  return HTestResult{h, p, groups.size()};
}

double euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("euclidean: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

Dendrogram hier_cluster(const std::vector<std::vector<double>>& points) {
  const std::size_t n = points.size();
  if (n < 2) throw std::invalid_argument("hier_cluster: need at least two points");
  for (const auto& p : points)
    if (p.size() != points[0].size())
      throw std::invalid_argument("hier_cluster: dimension mismatch");

  std::vector<std::vector<double>> point_dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      point_dist[i][j] = point_dist[j][i] = euclidean(points[i], points[j]);

  struct Cluster {
    std::size_t id;
    std::vector<std::size_t> members;
  };
  std::vector<Cluster> active;
  for (std::size_t i = 0; i < n; ++i) active.push_back({i, {i}});

  auto linkage = [&](const Cluster& x, const Cluster& y) {
    double s = 0.0;
    for (auto i : x.members)
      for (auto j : y.members) s += point_dist[i][j];
    return s / static_cast<double>(x.members.size() * y.members.size());
  };

  Dendrogram out;
  out.leaves = n;
  while (active.size() > 1) {
    std::size_t best_a = 0, best_b = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < active.size(); ++a)
      for (std::size_t b = a + 1; b < active.size(); ++b) {
        const double d = linkage(active[a], active[b]);
        if (d < best) {
          best = d;
          best_a = a;
          best_b = b;
        }
      }
    Cluster merged{n + out.merges.size(), active[best_a].members};
    merged.members.insert(merged.members.end(), active[best_b].members.begin(),
                          active[best_b].members.end());
    out.merges.push_back({active[best_a].id, active[best_b].id, best, merged.members.size()});
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_b));
    active[best_a] = std::move(merged);
  }
  return out;
}

std::vector<std::size_t> Dendrogram::members(std::size_t c) const {
  if (c < leaves) return {c};
  const auto& m = merges.at(c - leaves);
  auto left = members(m.a);
  auto right = members(m.b);
  left.insert(left.end(), right.begin(), right.end());
  return left;
}

std::vector<std::size_t> Dendrogram::similarity_order(
    std::size_t query, const std::vector<std::vector<double>>& points) const {
  if (query >= leaves) throw std::out_of_range("similarity_order: bad query index");
  std::vector<std::size_t> order;
  std::size_t current = query;
  for (std::size_t i = 0; i < merges.size(); ++i) {
    const auto& m = merges[i];
    if (m.a != current && m.b != current) continue;
    auto joining = members(m.a == current ? m.b : m.a);
    std::sort(joining.begin(), joining.end(), [&](auto l, auto r) {
      const double dl = euclidean(points[query], points[l]);
      const double dr = euclidean(points[query], points[r]);
      return dl != dr ? dl < dr : l < r;
    });
    order.insert(order.end(), joining.begin(), joining.end());
    current = leaves + i;
  }
  return order;
}

std::optional<double> auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auroc: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto l, auto r) { return scores[l] < scores[r]; });

  // U = sum over tie blocks of pos * (negatives strictly below) + pos * neg / 2.
  double u = 0.0;
  double neg_below = 0.0;
  double pos_total = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double pos = 0.0, neg = 0.0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? pos : neg) += 1.0;
      ++j;
    }
    u += pos * neg_below + 0.5 * pos * neg;
    neg_below += neg;
    pos_total += pos;
    i = j;
  }
  if (pos_total == 0.0 || neg_below == 0.0) return std::nullopt;
  return u / (pos_total * neg_below);
}

std::optional<double> auprc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auprc: length mismatch");
  const double positives = static_cast<double>(std::count_if(labels.begin(), labels.end(),
                                                             [](int v) { return v != 0; }));
  if (positives == 0.0) return std::nullopt;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto l, auto r) { return scores[l] > scores[r]; });

  double ap = 0.0, tp = 0.0, seen = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]]) tp += 1.0;
      seen += 1.0;
      ++j;
    }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / seen);
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double stddev(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size()));
}

}  // namespace eventcast::stats
