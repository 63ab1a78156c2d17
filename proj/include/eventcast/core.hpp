#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eventcast {

using Date = std::chrono::sys_days;

/// Parses "YYYY-MM-DD" or "YYYYMMDD". Throws std::invalid_argument.
Date parse_date(std::string_view text);
std::string format_date(Date d);
Date make_date(int year, unsigned month, unsigned day);
/// Inclusive list of consecutive days.
std::vector<Date> date_range(Date first, Date last);

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::vector<double> col(std::size_t c) const;
  void set_col(std::size_t c, std::span<const double> values);

  void append_row(std::span<const double> values);
  Matrix select_rows(std::span<const std::size_t> idx) const;
  Matrix select_cols(std::span<const std::size_t> idx) const;

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// splitmix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Small deterministic generator (xoshiro256**) with portable distributions,
/// so results do not depend on the standard library's distribution code.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  double normal();

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// FNV-1a over a string; used for config fingerprints.
std::uint64_t fingerprint(std::string_view text);
std::string hex64(std::uint64_t v);

/// Runs body(i) for i in [0, n) on up to `threads` workers. Order of side
/// effects is unspecified; callers write results into pre-sized slots.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& body);

}  // namespace eventcast

#include "eventcast/detail/parallel.hpp"
