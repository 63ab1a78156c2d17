#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace eventcast::stats {

struct KsResult {
  double D = 0.0;
  double p = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test. D is the largest gap between the two
/// empirical CDFs; p comes from the asymptotic Kolmogorov distribution with
/// effective size |a||b|/(|a|+|b|). Throws on an empty sample.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Upper tail of the limiting Kolmogorov distribution, Q(lambda) = P(K > lambda).
double kolmogorov_survival(double lambda);

/// Mid-ranks (1-based, ties get the average rank).
std::vector<double> midranks(std::span<const double> x);

/// Pearson correlation of mid-ranks. nullopt when either input has zero rank
/// variance. Throws on length mismatch or fewer than two points.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

struct HTestResult {
  double H = 0.0;
  double p = 1.0;
  std::size_t group_count = 0;
};

/// Kruskal-Wallis H with tie correction; p is the chi-square upper tail with
/// k-1 degrees of freedom. nullopt when every observation is identical.
std::optional<HTestResult> kruskal_wallis(const std::vector<std::vector<double>>& groups);

/// Chi-square survival function.
double chi_square_survival(double x, double dof);

struct Merge {
  std::size_t a = 0;  // cluster ids: [0, n) are points, n + i is the i-th merge
  std::size_t b = 0;
  double distance = 0.0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::size_t leaves = 0;
  std::vector<Merge> merges;
  std::string method = "average/euclidean";

  /// Members (leaf indices) of cluster id `c`.
  std::vector<std::size_t> members(std::size_t c) const;
  /// Other points in the order they join `query`'s cluster; points joining in
  /// the same merge are ordered by their distance to the query, then index.
  std::vector<std::size_t> similarity_order(std::size_t query,
                                            const std::vector<std::vector<double>>& points) const;
};

/// Agglomerative clustering, average linkage over Euclidean distance.
Dendrogram hier_cluster(const std::vector<std::vector<double>>& points);

double euclidean(std::span<const double> a, std::span<const double> b);

/// Area under the ROC curve as the Mann-Whitney probability
/// P(s+ > s-) + P(s+ = s-)/2. nullopt unless both classes are present.
std::optional<double> auroc(std::span<const double> scores, std::span<const int> labels);

/// Tag written next to every reported AUPRC.
inline constexpr const char* kAuprcConvention =
    "average_precision(step, tied scores form one threshold)";

/// Average precision: sum over distinct thresholds (descending) of
/// precision x recall increment. nullopt without positives.
std::optional<double> auprc(std::span<const double> scores, std::span<const int> labels);

double mean(std::span<const double> x);
/// Population standard deviation (divides by n); 0 for an empty input.
double stddev(std::span<const double> x);

}  // namespace eventcast::stats
