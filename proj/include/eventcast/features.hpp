#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "eventcast/core.hpp"
#include "eventcast/ingest.hpp"

namespace eventcast::features {

enum class WindowKind { Fixed, KS, Stacked };

struct WindowSpec {
  WindowKind kind = WindowKind::Fixed;
  std::size_t length = 1;  // Δt for Fixed/Stacked, Δt* for KS

  static WindowSpec fixed(std::size_t dt) { return {WindowKind::Fixed, dt}; }
  static WindowSpec ks(std::size_t dt_max) { return {WindowKind::KS, dt_max}; }
  static WindowSpec stacked(std::size_t dt) { return {WindowKind::Stacked, dt}; }

  void validate() const;
  /// "dt=14", "dt*=14", "stack=7".
  std::string label() const;
  static WindowSpec parse(const std::string& text);
};

/// Mean of the previous `dt` entries: out[i] = mean(column[i-dt .. i-1]).
/// Entries i < dt have no complete window and are NaN. Throws if dt == 0 or
/// dt >= column.size().
std::vector<double> moving_average(std::span<const double> column, std::size_t dt);

/// A derived matrix whose rows before `first_valid` are incomplete (NaN).
struct Representation {
  Matrix X;
  std::size_t first_valid = 0;
};

Representation moving_average(const Matrix& X, std::size_t dt);

struct FittedWindows {
  std::vector<std::size_t> t;    // chosen window per feature, in [1, dt_max]
  std::vector<double> p_min;     // K-S p-value at the chosen window
  std::size_t dt_max = 1;
  bool degenerate = false;       // a class was empty; every t_j fell back to 1

  std::size_t max_window() const;
  friend bool operator==(const FittedWindows&, const FittedWindows&) = default;
};

/// Per-feature K-S window selection. For every feature j and t in [1, dt_max]
/// the t-day moving average is compared between non-event and event rows with
/// a two-sample K-S test; t_j is the argmin of the p-value, ties to smaller t.
/// Rows without a complete t-day window are left out of that t's test.
FittedWindows ks_fit(const Matrix& X, std::span<const int> y, std::size_t dt_max,
                     unsigned threads = 1);

/// Same, but only rows listed in `rows` take part in the tests. Moving
/// averages still read the full columns, so callers must make sure the
/// windows of those rows only touch admissible days.
FittedWindows ks_fit_rows(const Matrix& X, std::span<const int> y,
                          std::span<const std::size_t> rows, std::size_t dt_max,
                          unsigned threads = 1);

/// Column j becomes moving_average(column j, t_j). Rows before max_j t_j are
/// invalid. Throws on a feature-count mismatch.
Representation ks_transform(const Matrix& X, const FittedWindows& fitted);

std::string fitted_windows_csv(const FittedWindows& fitted,
                               const std::vector<ingest::FeatureId>& features);
FittedWindows fitted_windows_from_csv(const std::string& text);

/// Flattened instance for day i: rows i-dt .. i-1 of X, oldest first, each row
/// contributing its m features contiguously.
std::vector<double> stack_row(const Matrix& X, std::size_t day, std::size_t dt);

/// One instance per day i >= dt (n - dt rows of width dt * m).
Representation stack(const Matrix& X, std::size_t dt);

struct MinMaxScaler {
  std::vector<double> min;
  std::vector<double> max;
};

MinMaxScaler minmax_fit(const Matrix& X, std::span<const std::size_t> rows);
MinMaxScaler minmax_fit(const Matrix& X);
/// (x - min) / (max - min) per column; constant columns map to 0; no clamping.
Matrix minmax_apply(const Matrix& X, const MinMaxScaler& scaler);
void minmax_apply_inplace(std::span<double> row, const MinMaxScaler& scaler);

/// y'_i = 1 iff some y_{i+k} = 1 for k in [0, dp-1].
std::vector<int> propagate_labels(std::span<const int> y, std::size_t dp);

struct Aggregated {
  Matrix X;
  std::vector<int> y;
};

/// Non-overlapping blocks of dp days: feature means, OR of labels. A trailing
/// partial block is dropped. Throws if dp == 0 or dp > n.
Aggregated aggregate_dates(const Matrix& X, std::span<const int> y, std::size_t dp);

/// Dataset-level wrapper; each block is dated by its first day.
ingest::LocationDataset aggregate_dataset(const ingest::LocationDataset& ds, std::size_t dp);

enum class PredictionMode { LabelPropagation, DateAggregation };

struct PredictionWindowSpec {
  std::size_t dp = 1;
  PredictionMode mode = PredictionMode::LabelPropagation;
};

ingest::LocationDataset apply_prediction_window(const ingest::LocationDataset& ds,
                                                const PredictionWindowSpec& spec);

}  // namespace eventcast::features
