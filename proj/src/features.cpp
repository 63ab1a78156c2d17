#include "eventcast/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "eventcast/stats.hpp"
#include "text.hpp"

namespace eventcast::features {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

void WindowSpec::validate() const {
  if (length < 1) throw std::invalid_argument("window length must be >= 1");
}

std::string WindowSpec::label() const {
  switch (kind) {
    case WindowKind::Fixed: return "dt=" + std::to_string(length);
    case WindowKind::KS: return "dt*=" + std::to_string(length);
    case WindowKind::Stacked: return "stack=" + std::to_string(length);
  }
  return "?";
}

WindowSpec WindowSpec::parse(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("bad window spec: " + text);
  const auto kind = text.substr(0, eq);
  const auto value = text::to_int(text.substr(eq + 1));
  if (!value || *value < 1) throw std::invalid_argument("bad window length: " + text);
  const auto len = static_cast<std::size_t>(*value);
  if (kind == "dt") return fixed(len);
  if (kind == "dt*") return ks(len);
  if (kind == "stack") return stacked(len);
  throw std::invalid_argument("bad window kind: " + text);
}

std::vector<double> moving_average(std::span<const double> column, std::size_t dt) {
  if (dt == 0) throw std::invalid_argument("moving_average: dt must be >= 1");
  if (dt >= column.size()) throw std::invalid_argument("moving_average: dt must be < n");
  std::vector<double> out(column.size(), kNaN);
  const double denom = static_cast<double>(dt);
  for (std::size_t i = dt; i < column.size(); ++i) {
    double sum = 0.0;
    for (std::size_t k = 1; k <= dt; ++k) sum += column[i - k];
    out[i] = sum / denom;
  }
  return out;
}

Representation moving_average(const Matrix& X, std::size_t dt) {
  Representation rep{Matrix(X.rows(), X.cols()), dt};
  for (std::size_t j = 0; j < X.cols(); ++j) rep.X.set_col(j, moving_average(X.col(j), dt));
  return rep;
}

std::size_t FittedWindows::max_window() const {
  return t.empty() ? 0 : *std::max_element(t.begin(), t.end());
}

FittedWindows ks_fit_rows(const Matrix& X, std::span<const int> y,
                          std::span<const std::size_t> rows, std::size_t dt_max,
                          unsigned threads) {
  if (dt_max < 1) throw std::invalid_argument("ks_fit: dt_max must be >= 1");
  if (y.size() != X.rows()) throw std::invalid_argument("ks_fit: label length mismatch");
  const std::size_t m = X.cols();
  FittedWindows fit{std::vector<std::size_t>(m, 1), std::vector<double>(m, 1.0), dt_max, false};

  bool has_pos = false, has_neg = false;
  for (auto r : rows) {
    if (r < 1) continue;
    (y[r] ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) {
    fit.degenerate = true;
    return fit;
  }

  parallel_for(m, threads, [&](std::size_t j) {
    const auto column = X.col(j);
    double best_p = 1.0;
    std::size_t best_t = 1;
    bool any = false;
    std::vector<double> events, others;
    for (std::size_t t = 1; t <= dt_max && t < column.size(); ++t) {
      const auto ma = moving_average(column, t);
      events.clear();
      others.clear();
      for (auto r : rows) {
        if (r < t) continue;
        (y[r] ? events : others).push_back(ma[r]);
      }
      if (events.empty() || others.empty()) continue;
      const double p = stats::ks_two_sample(others, events).p;
      if (!any || p < best_p) {
        best_p = p;
        best_t = t;
        any = true;
      }
    }
    fit.t[j] = best_t;
    fit.p_min[j] = best_p;
  });
  return fit;
}

FittedWindows ks_fit(const Matrix& X, std::span<const int> y, std::size_t dt_max,
                     unsigned threads) {
  std::vector<std::size_t> rows(X.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return ks_fit_rows(X, y, rows, dt_max, threads);
}

Representation ks_transform(const Matrix& X, const FittedWindows& fitted) {
  if (fitted.t.size() != X.cols())
    throw std::invalid_argument("ks_transform: feature count mismatch");
  Representation rep{Matrix(X.rows(), X.cols()), fitted.max_window()};
  for (std::size_t j = 0; j < X.cols(); ++j)
    rep.X.set_col(j, moving_average(X.col(j), fitted.t[j]));
  for (std::size_t i = 0; i < std::min(rep.first_valid, X.rows()); ++i)
    for (std::size_t j = 0; j < X.cols(); ++j) rep.X(i, j) = kNaN;
  return rep;
}

std::string fitted_windows_csv(const FittedWindows& fitted,
                               const std::vector<ingest::FeatureId>& features) {
  if (features.size() != fitted.t.size())
    throw std::invalid_argument("fitted_windows_csv: feature count mismatch");
  std::string out = "feature_id,t_j,p_min_j\n";
  for (std::size_t j = 0; j < features.size(); ++j)
    out += features[j].name() + "," + std::to_string(fitted.t[j]) + "," +
           text::shortest(fitted.p_min[j]) + "\n";
  return out;
}

FittedWindows fitted_windows_from_csv(const std::string& content) {
  FittedWindows fit;
  auto rows = text::lines(content);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto cells = text::split(rows[i], ',');
    if (cells.size() != 3) throw std::invalid_argument("fitted windows: bad row");
    const auto t = text::to_int(cells[1]);
    const auto p = text::to_double(cells[2]);
    if (!t || !p || *t < 1) throw std::invalid_argument("fitted windows: bad value");
    fit.t.push_back(static_cast<std::size_t>(*t));
    fit.p_min.push_back(*p);
  }
  fit.dt_max = fit.max_window();
  return fit;
}

std::vector<double> stack_row(const Matrix& X, std::size_t day, std::size_t dt) {
  if (dt == 0 || day < dt || day >= X.rows())
    throw std::invalid_argument("stack_row: day needs dt complete prior rows");
  std::vector<double> out;
  out.reserve(dt * X.cols());
  for (std::size_t r = day - dt; r < day; ++r) {
    auto src = X.row(r);
    out.insert(out.end(), src.begin(), src.end());
  }
  return out;
}

Representation stack(const Matrix& X, std::size_t dt) {
  if (dt == 0) throw std::invalid_argument("stack: dt must be >= 1");
  if (dt >= X.rows()) throw std::invalid_argument("stack: dt must be < n");
  Representation rep{Matrix(0, dt * X.cols()), dt};
  for (std::size_t i = dt; i < X.rows(); ++i) rep.X.append_row(stack_row(X, i, dt));
  return rep;
}

MinMaxScaler minmax_fit(const Matrix& X, std::span<const std::size_t> rows) {
  if (rows.empty()) throw std::invalid_argument("minmax_fit: no rows");
  MinMaxScaler s{std::vector<double>(X.cols(), std::numeric_limits<double>::infinity()),
                 std::vector<double>(X.cols(), -std::numeric_limits<double>::infinity())};
  for (auto r : rows)
    for (std::size_t j = 0; j < X.cols(); ++j) {
      s.min[j] = std::min(s.min[j], X(r, j));
      s.max[j] = std::max(s.max[j], X(r, j));
    }
  return s;
}

MinMaxScaler minmax_fit(const Matrix& X) {
  std::vector<std::size_t> rows(X.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return minmax_fit(X, rows);
}

void minmax_apply_inplace(std::span<double> row, const MinMaxScaler& scaler) {
  if (row.size() != scaler.min.size()) throw std::invalid_argument("minmax_apply: width mismatch");
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double range = scaler.max[j] - scaler.min[j];
    row[j] = range > 0.0 ? (row[j] - scaler.min[j]) / range : 0.0;
  }
}

Matrix minmax_apply(const Matrix& X, const MinMaxScaler& scaler) {
  Matrix out = X;
  for (std::size_t r = 0; r < out.rows(); ++r) minmax_apply_inplace(out.row(r), scaler);
  return out;
}

std::vector<int> propagate_labels(std::span<const int> y, std::size_t dp) {
  if (dp == 0) throw std::invalid_argument("propagate_labels: dp must be >= 1");
  std::vector<int> out(y.size(), 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!y[i]) continue;
    const std::size_t from = i + 1 >= dp ? i + 1 - dp : 0;
    for (std::size_t k = from; k <= i; ++k) out[k] = 1;
  }
  return out;
}

Aggregated aggregate_dates(const Matrix& X, std::span<const int> y, std::size_t dp) {
  if (dp == 0) throw std::invalid_argument("aggregate_dates: dp must be >= 1");
  if (dp > X.rows()) throw std::invalid_argument("aggregate_dates: dp must be <= n");
  if (y.size() != X.rows()) throw std::invalid_argument("aggregate_dates: label length mismatch");
  const std::size_t blocks = X.rows() / dp;
  Aggregated out{Matrix(blocks, X.cols()), std::vector<int>(blocks, 0)};
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t d = b * dp; d < (b + 1) * dp; ++d) {
      for (std::size_t j = 0; j < X.cols(); ++j) out.X(b, j) += X(d, j);
      if (y[d]) out.y[b] = 1;
    }
    for (std::size_t j = 0; j < X.cols(); ++j) out.X(b, j) /= static_cast<double>(dp);
  }
  return out;
}

ingest::LocationDataset aggregate_dataset(const ingest::LocationDataset& ds, std::size_t dp) {
  auto agg = aggregate_dates(ds.X, ds.y, dp);
  ingest::LocationDataset out{ds.state, {}, std::move(agg.X), std::move(agg.y), ds.features};
  for (std::size_t b = 0; b < out.y.size(); ++b) out.dates.push_back(ds.dates[b * dp]);
  return out;
}

ingest::LocationDataset apply_prediction_window(const ingest::LocationDataset& ds,
                                                const PredictionWindowSpec& spec) {
  if (spec.mode == PredictionMode::DateAggregation) return aggregate_dataset(ds, spec.dp);
  auto out = ds;
  out.y = propagate_labels(ds.y, spec.dp);
  return out;
}

}  // namespace eventcast::features
