#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "eventcast/core.hpp"
#include "eventcast/neural.hpp"

namespace oracle {

inline double pairwise_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (y[i] == 1)
      for (std::size_t j = 0; j < s.size(); ++j)
        if (y[j] == 0) {
          pairs += 1;
          num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
  return num / pairs;
}

inline double ecdf_scan_d(const std::vector<double>& a, const std::vector<double>& b) {
  double best = 0;
  for (const auto* s : {&a, &b})
    for (double x : *s) {
      double fa = 0, fb = 0;
      for (double v : a) fa += v <= x;
      for (double v : b) fb += v <= x;
      best = std::max(best, std::abs(fa / a.size() - fb / b.size()));
    }
  return best;
}

struct GradCheck {
  double worst = 0.0;
  std::size_t checked = 0;
};

// Central differences (step 1e-5) on every parameter; relative error uses
// max(|analytic|, |numeric|, 1e-6) as the denominator.
inline GradCheck grad_check(const eventcast::Matrix& X, const std::vector<int>& y,
                            const eventcast::neural::NetSpec& spec,
                            const eventcast::neural::Params& params, double alpha) {
  using namespace eventcast::neural;
  std::vector<std::size_t> rows(X.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const LossConfig loss{alpha};
  const auto analytic = backward(X, y, rows, spec, params, loss).grad.flat();
  auto theta = params.flat();
  Params probe = params;
  GradCheck out;
  const double h = 1e-5;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double keep = theta[k];
    theta[k] = keep + h;
    probe.set_flat(theta);
    const double up = batch_loss(X, y, rows, spec, probe, loss);
    theta[k] = keep - h;
    probe.set_flat(theta);
    const double down = batch_loss(X, y, rows, spec, probe, loss);
    theta[k] = keep;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-6});
    out.worst = std::max(out.worst, std::abs(analytic[k] - numeric) / denom);
    ++out.checked;
  }
  return out;
}

// Random toy problem for gradient checks.
struct Toy {
  eventcast::neural::NetSpec spec;
  eventcast::neural::Params params;
  eventcast::Matrix X;
  std::vector<int> y;
  double alpha = 0.5;
};

inline Toy random_toy(eventcast::neural::Architecture arch, eventcast::neural::Cell cell,
                      std::uint64_t seed) {
  using namespace eventcast;
  using namespace eventcast::neural;
  Rng r(seed);
  Toy t;
  t.spec.arch = arch;
  t.spec.cell = cell;
  t.spec.inputs = 1 + r.below(3);
  t.spec.steps = 1 + r.below(3);
  t.spec.hidden = 2 + r.below(3);
  t.spec.feature_width = 1 + r.below(3);
  t.params = init_params(t.spec, mix_seed(seed, 1));
  // Scale up so the nets are away from their linear regime.
  auto flat = t.params.flat();
  for (auto& v : flat) v = v * 2 + 0.1 * r.normal();
  t.params.set_flat(flat);
  const std::size_t n = 3 + r.below(4);
  t.X = Matrix(n, t.spec.input_length());
  for (auto& v : t.X.data()) v = r.normal();
  t.y.resize(n);
  for (auto& v : t.y) v = r.below(2);
  t.alpha = 0.05 + 0.9 * r.uniform();
  return t;
}

}  // namespace oracle
