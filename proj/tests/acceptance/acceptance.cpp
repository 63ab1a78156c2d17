// One PASS/FAIL line per acceptance criterion, with wall time against its limit.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <algorithm>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <map>
#include <string>
#include <vector>

#include "eventcast/ensemble.hpp"
#include "eventcast/eval.hpp"
#include "eventcast/experiments.hpp"
#include "eventcast/features.hpp"
#include "eventcast/neural.hpp"
#include "eventcast/stats.hpp"
#include "oracles.hpp"

using namespace eventcast;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

int failures = 0;

std::string text_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void criterion(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < limit_s;
  const bool pass = o.ok && in_time;
  if (!pass) ++failures;
  std::printf("[%s] criterion %2d %-28s %8.2fs (limit %gs)  %s%s\n", pass ? "PASS" : "FAIL", id, name,
              secs, limit_s, o.detail.c_str(), in_time ? "" : "  [over time limit]");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome imbalance_arithmetic() {
  const std::map<std::size_t, double> table = {{24, 0.0170}, {18, 0.0127}, {14, 0.0099}};
  Outcome o;
  for (const auto& [count, printed] : table) {
    const auto y = experiments::labels_from_count(count, experiments::kReferenceDays);
    const double imb = neural::positive_fraction(y);
    const double rounded = std::round(imb * 1e4) / 1e4;
    if (std::abs(rounded - printed) > 1e-12) o.ok = false;
    o.detail += std::to_string(count) + "/1413=" + fmt("%.4f ", rounded);
  }
  return o;
}

Outcome purge_fidelity() {
  const auto dates = date_range(make_date(2015, 2, 18), make_date(2018, 12, 31));
  const auto plan = eval::make_folds(dates.size());
  const auto& last = plan.folds.back();
  const auto purged = eval::purge_rows(last, 14, dates.size());
  Outcome o;
  o.ok = dates.size() == 1413 && last.size() == 282 && dates[last.start] == make_date(2018, 3, 25) &&
         purged.size() == 14 && dates[purged.front()] == make_date(2018, 3, 11) &&
         dates[purged.back()] == make_date(2018, 3, 24);
  for (std::size_t i = 1; i < purged.size(); ++i) o.ok = o.ok && purged[i] == purged[i - 1] + 1;
  o.detail = "test fold " + format_date(dates[last.start]) + ".." + format_date(dates[last.end]) +
             ", purged " + format_date(dates[purged.front()]) + ".." + format_date(dates[purged.back()]) +
             " (" + std::to_string(purged.size()) + " rows)";
  return o;
}

Outcome ks_oracles() {
  Rng r(101);
  std::size_t d_mismatch = 0;
  for (int it = 0; it < 1000; ++it) {
    const std::size_t na = 2 + r.below(49), nb = 2 + r.below(49);
    const int levels = it % 3 == 0 ? 6 : 0;  // a third with heavy ties
    std::vector<double> a(na), b(nb);
    for (auto& v : a) v = levels ? static_cast<double>(r.below(levels)) : r.normal();
    for (auto& v : b) v = levels ? static_cast<double>(r.below(levels)) : r.normal() + 0.3;
    if (stats::ks_two_sample(a, b).D != oracle::ecdf_scan_d(a, b)) ++d_mismatch;
  }
  std::size_t t_mismatch = 0;
  for (int f = 0; f < 100; ++f) {
    const std::size_t n = 40 + r.below(80);
    Matrix X(n, 1);
    std::vector<int> y(n);
    for (auto& v : y) v = r.uniform() < 0.15;
    y[n - 1] = 1;
    y[n - 2] = 0;
    for (auto& v : X.data()) v = f % 4 == 0 ? static_cast<double>(r.below(3)) : r.normal();
    const std::size_t dt_max = 1 + r.below(10);
    const auto col = X.col(0);
    // Exhaustive scan: every t, naive moving average, brute-force ECDF gap.
    double best_p = 2;
    std::size_t best_t = 1;
    for (std::size_t t = 1; t <= dt_max; ++t) {
      std::vector<double> ev, ne;
      for (std::size_t i = t; i < n; ++i) {
        double s = 0;
        for (std::size_t k = 1; k <= t; ++k) s += col[i - k];
        (y[i] ? ev : ne).push_back(s / t);
      }
      if (ev.empty() || ne.empty()) continue;
      const double m1 = ne.size(), m2 = ev.size();
      const double p = std::clamp(
          stats::kolmogorov_survival(std::sqrt(m1 * m2 / (m1 + m2)) * oracle::ecdf_scan_d(ne, ev)),
          std::numeric_limits<double>::min(), 1.0);
      if (p < best_p) {
        best_p = p;
        best_t = t;
      }
    }
    if (features::ks_fit(X, y, dt_max).t[0] != best_t) ++t_mismatch;
  }
  return {d_mismatch == 0 && t_mismatch == 0,
          "D mismatches " + std::to_string(d_mismatch) + "/1000, t_j mismatches " +
              std::to_string(t_mismatch) + "/100"};
}

Outcome auroc_oracles() {
  Rng r(202);
  std::size_t mismatch = 0, variance = 0;
  for (int it = 0; it < 1000; ++it) {
    const std::size_t n = 2 + r.below(199);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const int levels = it % 2 ? 5 : 0;
    for (auto& v : s) v = levels ? static_cast<double>(r.below(levels)) : r.normal();
    for (auto& v : y) v = r.uniform() < 0.4;
    y[0] = 1;
    y[1] = 0;
    const double a = *stats::auroc(s, y);
    if (a != oracle::pairwise_auroc(s, y)) ++mismatch;
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::atan(s[i]) * 7 - 2;
    if (*stats::auroc(t, y) != a) ++variance;
  }
  return {mismatch == 0 && variance == 0, "pairwise mismatches " + std::to_string(mismatch) +
                                              "/1000, transform changes " + std::to_string(variance)};
}

Outcome gradient_checks() {
  using neural::Architecture;
  using neural::Cell;
  double worst = 0;
  std::size_t configs = 0, params = 0;
  const std::pair<Architecture, Cell> kinds[] = {{Architecture::Ffnn1, Cell::Gated},
                                                 {Architecture::Ffnn2, Cell::Gated},
                                                 {Architecture::Recurrent, Cell::Gated},
                                                 {Architecture::Recurrent, Cell::Simple}};
  for (std::uint64_t seed = 0; seed < 6; ++seed)
    for (const auto& [a, c] : kinds) {
      const auto t = oracle::random_toy(a, c, 1000 + seed * 17 + static_cast<std::uint64_t>(a) * 3 +
                                                  static_cast<std::uint64_t>(c));
      const auto g = oracle::grad_check(t.X, t.y, t.spec, t.params, t.alpha);
      worst = std::max(worst, g.worst);
      params += g.checked;
      ++configs;
    }
  return {worst < 1e-4 && configs >= 20,
          std::to_string(configs) + " configs, " + std::to_string(params) + " parameters, worst rel err " +
              fmt("%.2e", worst)};
}

Outcome loss_identities() {
  Rng r(303);
  bool exact = true;
  for (int it = 0; it < 200; ++it) {
    const std::size_t n = 1 + r.below(50);
    std::vector<int> y(n);
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = r.below(2);
      p[i] = it % 10 == 0 ? static_cast<double>(r.below(2)) : r.uniform();
    }
    exact = exact && neural::weighted_bce(y, p, 0.5) == 0.5 * neural::bce(y, p);
  }
  std::size_t ny = 0;
  for (const auto& [s, c] : experiments::reference_attack_counts())
    if (s == "NY") ny = c;
  const auto y = experiments::labels_from_count(ny, experiments::kReferenceDays);
  const double alpha = neural::positive_fraction(y);
  return {exact && alpha == 24.0 / 1413.0,
          std::string("wbce(0.5) == bce/2 on 200 cases: ") + (exact ? "exact" : "MISMATCH") +
              fmt(", alpha(NY) = %.6f (24/1413 = %.6f)", alpha, 24.0 / 1413.0)};
}

Outcome smote_properties() {
  Rng r(404);
  Outcome o;
  std::size_t synthetic = 0;
  for (int it = 0; it < 30; ++it) {
    const std::size_t n = 60 + r.below(60), m = 1 + r.below(4);
    Matrix X(n, m);
    for (auto& v : X.data()) v = r.normal();
    std::vector<int> y(n, 0);
    const std::size_t pos = 2 + r.below(8);
    for (std::size_t i = 0; i < pos; ++i) y[r.below(n)] = 1;
    const std::size_t k = 1 + r.below(5);
    const auto b = ensemble::smote_balance(X, y, {k, 1.0, static_cast<std::uint64_t>(it)});
    const auto ones = std::count(b.y.begin(), b.y.end(), 1);
    if (ones != static_cast<long>(b.y.size()) - ones) o.ok = false;
    std::vector<std::size_t> minority;
    for (std::size_t i = 0; i < n; ++i)
      if (y[i]) minority.push_back(i);
    std::vector<double> lo(m, 1e300), hi(m, -1e300);
    for (auto i : minority)
      for (std::size_t j = 0; j < m; ++j) {
        lo[j] = std::min(lo[j], X(i, j));
        hi[j] = std::max(hi[j], X(i, j));
      }
    auto dist = [&](std::size_t a, std::size_t c) {
      double s = 0;
      for (std::size_t j = 0; j < m; ++j) s += (X(a, j) - X(c, j)) * (X(a, j) - X(c, j));
      return s;
    };
    const std::size_t k_eff = std::min(k, minority.size() - 1);
    for (std::size_t row = n; row < b.X.rows(); ++row) {
      ++synthetic;
      const auto [p, q] = b.origin[row];
      if (!y[p] || !y[q]) o.ok = false;
      std::size_t closer = 0;
      for (auto c : minority)
        if (c != p && dist(p, c) < dist(p, q)) ++closer;
      if (closer >= k_eff) o.ok = false;
      double lambda = -1;
      for (std::size_t j = 0; j < m; ++j) {
        const double v = b.X(row, j);
        if (v < lo[j] - 1e-12 || v > hi[j] + 1e-12) o.ok = false;
        if (X(q, j) != X(p, j)) {
          const double l = (v - X(p, j)) / (X(q, j) - X(p, j));
          if (l < -1e-12 || l > 1 + 1e-12) o.ok = false;
          if (lambda >= 0 && std::abs(l - lambda) > 1e-9) o.ok = false;
          lambda = l;
        }
      }
    }
  }
  // Structural check inside cross validation.
  ingest::SynthConfig c;
  c.n_days = 300;
  c.m_features = 10;
  c.imbalance = 0.05;
  c.signal = ingest::PlantedSignal{};
  const auto ds = ingest::synth_generate(c).at(0);
  auto model = eval::default_model("rf", eval::Profile::Desk);
  model.estimators = 10;
  eval::CvOptions opt;
  opt.repeats = 2;
  const auto rep = eval::run_cv(ds, features::WindowSpec::ks(14), model, opt);
  if (rep.audit.smote_parent_violations != 0 || rep.audit.smote_parents_checked == 0) o.ok = false;
  o.detail = std::to_string(synthetic) + " synthetic rows checked; CV parents checked " +
             std::to_string(rep.audit.smote_parents_checked) + ", outside purged train " +
             std::to_string(rep.audit.smote_parent_violations);
  return o;
}

Outcome adaboost_invariants() {
  Rng r(505);
  double worst_sum = 0, worst_mass = 0;
  std::size_t steps = 0;
  for (int it = 0; it < 5; ++it) {
    Matrix X(200, 5);
    for (auto& v : X.data()) v = r.normal();
    std::vector<int> y(200);
    for (std::size_t i = 0; i < 200; ++i) y[i] = X(i, 0) + 0.5 * X(i, 1) * X(i, 2) + 0.3 * r.normal() > 0.2;
    std::vector<ensemble::BoostStep> trace;
    ensemble::ada_train(X, y, {60, static_cast<std::uint64_t>(it)}, &trace);
    for (const auto& s : trace) {
      worst_sum = std::max(worst_sum, std::abs(s.weight_sum - 1.0));
      if (s.kept && s.error > 0) worst_mass = std::max(worst_mass, std::abs(s.misclassified_mass - 0.5));
      ++steps;
    }
  }
  const bool alpha_exact = ensemble::ada_alpha(0.25) == 0.5 * std::log(3.0);
  return {worst_sum <= 1e-10 && worst_mass <= 1e-10 && alpha_exact,
          std::to_string(steps) + " iterations: max |sum w - 1| " + fmt("%.1e", worst_sum) +
              ", max |mass - 0.5| " + fmt("%.1e", worst_mass) + ", alpha(0.25) " +
              (alpha_exact ? "= ln3/2 exactly" : "MISMATCH")};
}

Outcome signal_recovery() {
  auto run = [](bool planted) {
    ingest::SynthConfig c;
    c.n_days = 800;
    c.m_features = 40;
    c.imbalance = 0.02;
    if (planted) c.signal = ingest::PlantedSignal{};  // window 7, shift 3 sd
    const auto ds = ingest::synth_generate(c).at(0);
    eval::CvOptions o;
    o.repeats = 10;
    return eval::run_cv(ds, features::WindowSpec::ks(14), eval::default_model("rf", eval::Profile::Desk), o);
  };
  const auto planted = run(true);
  const auto none = run(false);
  return {planted.mean >= 0.80 && std::abs(none.mean - 0.5) <= 0.1 && planted.audit.clean() &&
              none.audit.clean(),
          fmt("planted AUROC %.3f (>= 0.80), none %.3f (0.5 +- 0.1)", planted.mean, none.mean)};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "eventcast_acceptance_determinism";
  fs::remove_all(root);
  const std::string conf =
      "synth.n_days = 200\nsynth.m_features = 6\nsynth.n_states = 3\nsynth.imbalance = 0.05\n"
      "repeats = 2\nrf.estimators = 8\nada.estimators = 8\nnn.epochs = 2\nnn.hidden = 4\n"
      "lstm.hidden = 4\nsweep.max = 3\npred.max = 2\ngroup.max_threshold = 8\n"
      "baseline.rows = random:dt=1,rf:dt*=5,ada:dt=2,ffnn1:stack=2,ffnn2:stack=2,lstm:stack=2\n";
  const std::string d = EVENTCAST_TEST_DATA;
  auto make_ctx = [&](const std::string& tag, unsigned threads) {
    experiments::RunContext ctx;
    ctx.config = experiments::Config::parse(conf);
    ctx.config.set("ingest.gkg", d + "/gkg_sample.tsv");
    ctx.config.set("ingest.events", d + "/events_sample.tsv");
    ctx.config.set("ingest.incidents", d + "/incidents_sample.csv");
    ctx.config.set("ingest.start", "2016-01-01");
    ctx.config.set("ingest.end", "2016-01-10");
    ctx.seed = 17;
    ctx.threads = threads;
    ctx.out = root / tag;
    return ctx;
  };
  const std::pair<const char*, unsigned> runs[] = {{"a1", 1}, {"b1", 1}, {"c2", 2}, {"d4", 4}};
  for (const auto& [tag, threads] : runs) {
    const auto ctx = make_ctx(tag, threads);
    for (const auto& cmd : experiments::command_names()) experiments::run_command(cmd, ctx);
  }
  std::size_t files = 0, differ = 0, unstamped = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a1")) {
    if (!e.is_regular_file() || e.path().extension() == ".log") continue;
    const auto rel = fs::relative(e.path(), root / "a1");
    const auto ref = text_of(e.path());
    ++files;
    if (ref.find("fingerprint") == std::string::npos) ++unstamped;
    for (const char* other : {"b1", "c2", "d4"}) {
      const auto p = root / other / rel;
      if (!fs::exists(p) || text_of(p) != ref) ++differ;
    }
  }
  return {files > 0 && differ == 0 && unstamped == 0,
          std::to_string(experiments::command_names().size()) + " commands, " + std::to_string(files) +
              " files x 4 runs (threads 1,1,2,4): " + std::to_string(differ) + " differ, " +
              std::to_string(unstamped) + " without fingerprint"};
}

Outcome coarse_demo() {
  std::map<std::string, std::size_t> counts;
  for (const auto& [s, c] : experiments::reference_attack_counts()) counts[s] = c;
  const auto d = experiments::coarse_demo(counts, experiments::kReferenceDays, {"CA", "NY", "TX", "FL", "WA"});
  std::printf("    coarse demo: %zu instances, %zu positives; ours AUROC %.4f AUPRC %.4f; reference "
              "AUROC 0.733 AUPRC 0.468; baselines ours %.3f / %.4f, reference 0.500 / 0.003\n",
              d.instances, d.positives, d.auroc, d.auprc, d.baseline_auroc, d.baseline_auprc);
  return {d.baseline_auroc == 0.5 && std::abs(d.prevalence - 0.003) <= 5e-4 &&
              d.baseline_auprc == d.prevalence,
          fmt("baseline AUROC %.3f (exact 0.5), prevalence %.5f (0.003 +- 5e-4)", d.baseline_auroc,
              d.prevalence)};
}

}  // namespace

int main() {
  criterion(1, "imbalance arithmetic", 1, imbalance_arithmetic);
  criterion(2, "purge rule fidelity", 1, purge_fidelity);
  criterion(3, "K-S oracle equivalence", 30, ks_oracles);
  criterion(4, "AUROC oracle equivalence", 30, auroc_oracles);
  criterion(5, "gradient checks", 60, gradient_checks);
  criterion(6, "loss identities", 1, loss_identities);
  criterion(7, "SMOTE properties", 10, smote_properties);
  criterion(8, "AdaBoost invariants", 10, adaboost_invariants);
  criterion(9, "end-to-end signal recovery", 300, signal_recovery);
  criterion(10, "determinism", 120, determinism);
  criterion(11, "coarse evaluation demo", 10, coarse_demo);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
