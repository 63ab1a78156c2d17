#include "eventcast/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "eventcast/stats.hpp"
#include "text.hpp"

namespace eventcast::eval {

namespace {

using nlohmann::ordered_json;

std::size_t count_positive(std::span<const int> y, std::span<const std::size_t> rows) {
  std::size_t c = 0;
  for (auto r : rows) c += y[r] ? 1 : 0;
  return c;
}

bool both_classes(std::span<const int> y, std::span<const std::size_t> rows) {
  const auto pos = count_positive(y, rows);
  return pos > 0 && pos < rows.size();
}

// Day-aligned representation: row i of X describes day i of its block; rows
// without a complete window are NaN.
Matrix stacked_aligned(const Pooled& P, std::size_t dt) {
  const std::size_t m = P.X.cols();
  Matrix out(P.X.rows(), dt * m, std::numeric_limits<double>::quiet_NaN());
  const std::size_t blocks = P.X.rows() / P.n;
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t i = dt; i < P.n; ++i) {
      auto dst = out.row(b * P.n + i);
      std::size_t k = 0;
      for (std::size_t r = b * P.n + i - dt; r < b * P.n + i; ++r)
        for (double v : P.X.row(r)) dst[k++] = v;
    }
  return out;
}

struct FoldPrep {
  FoldRows base;
  std::size_t blocks = 1;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  Matrix rep;  // KS only; otherwise the shared representation is used
  std::optional<features::FittedWindows> fitted;
  std::size_t window_max = 0;
};

std::uint64_t dataset_hash(const Pooled& P) {
  const auto& d = P.X.data();
  std::string bytes(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double));
  for (int v : P.y) bytes.push_back(static_cast<char>(v));
  for (const auto& s : P.states) bytes += s;
  return fingerprint(bytes);
}

ordered_json opt_json(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

std::vector<std::size_t> FoldPlan::sizes() const {
  std::vector<std::size_t> out;
  for (const auto& f : folds) out.push_back(f.size());
  return out;
}

FoldPlan make_folds(std::size_t n, std::size_t k) {
  if (k == 0) throw std::invalid_argument("make_folds: k must be >= 1");
  if (n < k) throw std::invalid_argument("make_folds: n must be >= k");
  FoldPlan plan{n, {}};
  const std::size_t base = n / k, extra = n % k;
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    plan.folds.push_back({start, start + len - 1});
    start += len;
  }
  return plan;
}

std::vector<std::size_t> purge_rows(const Fold& fold, std::size_t dt, std::size_t n,
                                    std::size_t horizon) {
  std::vector<std::size_t> out;
  const std::size_t reach = dt + horizon;
  const std::size_t lo = fold.start >= reach ? fold.start - reach : 0;
  for (std::size_t d = lo; d < fold.start; ++d) out.push_back(d);
  for (std::size_t d = fold.end + 1; d <= fold.end + dt && d < n; ++d) out.push_back(d);
  return out;
}

FoldRows fold_rows(const FoldPlan& plan, std::size_t fold, std::size_t dt, std::size_t horizon) {
  if (fold >= plan.folds.size()) throw std::out_of_range("fold_rows: fold index");
  const auto& f = plan.folds[fold];
  FoldRows rows;
  std::vector<char> purged(plan.n, 0);
  for (auto d : purge_rows(f, dt, plan.n, horizon)) purged[d] = 1;
  for (std::size_t d = dt; d < plan.n; ++d) {
    if (f.contains(d)) rows.test.push_back(d);
    else if (purged[d]) rows.purged.push_back(d);
    else rows.train.push_back(d);
  }
  return rows;
}

std::size_t effective_window(const features::WindowSpec& window) {
  window.validate();
  return window.length;
}

Profile parse_profile(const std::string& name) {
  if (name == "desk") return Profile::Desk;
  if (name == "paper") return Profile::Paper;
  throw std::invalid_argument("unknown profile: " + name + " (expected desk or paper)");
}

std::string profile_name(Profile p) { return p == Profile::Desk ? "desk" : "paper"; }

std::string ModelSpec::name() const {
  switch (kind) {
    case ModelKind::Random: return "random";
    case ModelKind::RandomForest: return "rf";
    case ModelKind::AdaBoost: return "ada";
    case ModelKind::Ffnn1: return "ffnn1";
    case ModelKind::Ffnn2: return "ffnn2";
    case ModelKind::Recurrent: return cell == neural::Cell::Gated ? "lstm" : "rnn";
  }
  return "?";
}

std::string ModelSpec::describe() const {
  std::ostringstream s;
  s << name();
  if (is_ensemble())
    s << " estimators=" << estimators << " subspace=" << subspace << " smote=" << smote
      << " smote_k=" << smote_k;
  if (is_neural()) {
    s << " hidden=" << hidden;
    if (kind == ModelKind::Ffnn2) s << " feature_width=" << feature_width;
    s << " lr=" << text::shortest(optimizer.learning_rate)
      << " decay=" << text::shortest(optimizer.decay) << " batch=" << optimizer.batch_size
      << " epochs=" << optimizer.epochs << " momentum=" << text::shortest(optimizer.momentum);
  }
  return s.str();
}

ModelSpec default_model(const std::string& name, Profile profile) {
  ModelSpec spec;
  const bool paper = profile == Profile::Paper;
  if (name == "random") spec.kind = ModelKind::Random;
  else if (name == "rf") spec.kind = ModelKind::RandomForest;
  else if (name == "ada") spec.kind = ModelKind::AdaBoost;
  else if (name == "ffnn1") spec.kind = ModelKind::Ffnn1;
  else if (name == "ffnn2") spec.kind = ModelKind::Ffnn2;
  else if (name == "lstm" || name == "rnn") {
    spec.kind = ModelKind::Recurrent;
    spec.cell = name == "lstm" ? neural::Cell::Gated : neural::Cell::Simple;
  } else {
    throw std::invalid_argument("unknown model: " + name +
                                " (expected random, rf, ada, ffnn1, ffnn2, lstm, rnn)");
  }
  spec.smote = spec.is_ensemble();
  spec.estimators = paper ? 3000 : 100;
  if (spec.kind == ModelKind::Recurrent) spec.hidden = paper ? 1024 : 64;
  else spec.hidden = paper ? 8000 : 64;
  spec.optimizer.epochs = paper ? 100 : 50;
  return spec;
}

std::optional<double> EvalReport::fold_mean(std::size_t fold) const {
  std::vector<double> v;
  for (const auto& f : folds)
    if (f.fold == fold && !f.excluded && f.auroc) v.push_back(*f.auroc);
  if (v.empty()) return std::nullopt;
  return stats::mean(v);
}

Pooled pool(const ingest::LocationDataset& base,
            const std::vector<const ingest::LocationDataset*>& extras) {
  base.validate();
  Pooled P{base.X, base.y, base.n(), {base.state}};
  for (const auto* e : extras) {
    if (!e) throw std::invalid_argument("pool: null dataset");
    if (e->features != base.features)
      throw std::invalid_argument("feature registry of " + e->state + " does not match " +
                                  base.state);
    if (e->dates != base.dates)
      throw std::invalid_argument("date index of " + e->state + " does not match " + base.state);
    for (std::size_t r = 0; r < e->n(); ++r) P.X.append_row(e->X.row(r));
    P.y.insert(P.y.end(), e->y.begin(), e->y.end());
    P.states.push_back(e->state);
  }
  return P;
}

std::vector<std::size_t> supplement_training(const Pooled& P,
                                             std::span<const std::size_t> base_train,
                                             std::size_t blocks) {
  if (blocks == 0 || blocks > P.states.size())
    throw std::invalid_argument("supplement_training: bad block count");
  std::vector<std::size_t> rows;
  rows.reserve(base_train.size() * blocks);
  for (std::size_t b = 0; b < blocks; ++b)
    for (auto d : base_train) {
      if (d >= P.n) throw std::out_of_range("supplement_training: day index");
      rows.push_back(b * P.n + d);
    }
  return rows;
}

EvalReport run_cv(const ingest::LocationDataset& dataset, const features::WindowSpec& window,
                  const ModelSpec& model, const CvOptions& options) {
  const std::size_t dt = effective_window(window);
  if (options.repeats == 0) throw std::invalid_argument("run_cv: repeats must be >= 1");
  const Pooled P = pool(dataset, options.extras);
  const std::size_t n = P.n, m = dataset.m();
  if (dt >= n) throw std::invalid_argument("run_cv: window does not fit the series");
  const FoldPlan plan = make_folds(n, options.k);
  const std::size_t k = plan.folds.size();
  const std::size_t total_blocks = P.states.size();

  // Shared representations.
  Matrix shared;
  if (window.kind == features::WindowKind::Fixed) shared = features::moving_average(P.X, dt).X;
  else if (window.kind == features::WindowKind::Stacked) shared = stacked_aligned(P, dt);

  std::vector<FoldPrep> prep(k);
  for (std::size_t f = 0; f < k; ++f) {
    auto& fp = prep[f];
    fp.base = fold_rows(plan, f, dt, options.label_horizon);
    fp.blocks = total_blocks;
    if (options.event_threshold) {
      fp.blocks = 1;
      std::size_t pos = count_positive(P.y, fp.base.train);
      while (pos <= *options.event_threshold && fp.blocks < total_blocks) {
        const auto add = supplement_training(P, fp.base.train, fp.blocks + 1);
        pos = count_positive(P.y, add);
        ++fp.blocks;
      }
    }
    fp.train = supplement_training(P, fp.base.train, fp.blocks);
    fp.test = options.pool_test ? supplement_training(P, fp.base.test, fp.blocks) : fp.base.test;
    fp.window_max = dt;
    if (window.kind == features::WindowKind::KS) {
      fp.fitted = features::ks_fit_rows(P.X, P.y, fp.train, dt, options.threads);
      fp.rep = features::ks_transform(P.X, *fp.fitted).X;
      fp.window_max = fp.fitted->max_window();
    }
  }

  EvalReport report;
  report.state = dataset.state;
  report.window = window.label();
  report.model = model.name();
  report.model_detail = model.describe();
  report.n = n;
  report.m = m;
  report.k = k;
  report.repeats = options.repeats;
  report.seed = options.seed;

  // Structural audit.
  if (options.audit) {
    for (std::size_t f = 0; f < k; ++f) {
      const auto& fp = prep[f];
      ++report.audit.folds_checked;
      std::vector<int> role(n, 0);
      for (auto d : fp.base.train) role[d] += 1;
      for (auto d : fp.base.purged) role[d] += 10;
      for (auto d : fp.base.test) role[d] += 100;
      for (std::size_t d = dt; d < n; ++d)
        if (role[d] != 1 && role[d] != 10 && role[d] != 100) ++report.audit.partition_violations;
      for (std::size_t d = 0; d < dt; ++d)
        if (role[d] != 0) ++report.audit.partition_violations;
      std::vector<char> test_window(n, 0);
      for (auto r : fp.test) {
        const auto d = r % n;
        for (std::size_t x = d - dt; x <= d; ++x) test_window[x] = 1;
      }
      for (auto r : fp.train) {
        const auto d = r % n;
        for (std::size_t x = d - dt; x <= d; ++x)
          if (test_window[x]) {
            ++report.audit.window_overlaps;
            break;
          }
      }
      if (fp.fitted) {
        // Refit with every test-fold day hidden; the windows must not change.
        Matrix masked = P.X;
        const auto& span = plan.folds[f];
        for (std::size_t b = 0; b < total_blocks; ++b)
          for (std::size_t d = span.start; d <= span.end; ++d)
            for (auto& v : masked.row(b * n + d)) v = std::numeric_limits<double>::quiet_NaN();
        std::vector<int> masked_y = P.y;
        for (std::size_t b = 0; b < total_blocks; ++b)
          for (std::size_t d = span.start; d <= span.end; ++d) masked_y[b * n + d] = 0;
        ++report.audit.ks_refits_checked;
        if (!(features::ks_fit_rows(masked, masked_y, fp.train, dt, options.threads) == *fp.fitted))
          ++report.audit.ks_refit_mismatches;
      }
    }
  }

  const std::size_t tasks = options.repeats * k;
  std::vector<FoldResult> results(tasks);
  std::vector<std::vector<Prediction>> preds(tasks);
  std::vector<std::size_t> parent_checks(tasks, 0), parent_violations(tasks, 0);

  parallel_for(tasks, options.threads, [&](std::size_t task) {
    const std::size_t r = task / k, f = task % k;
    const auto& fp = prep[f];
    const Matrix& rep = fp.fitted ? fp.rep : shared;
    const std::uint64_t task_seed = mix_seed(mix_seed(options.seed, r), f);

    FoldResult res;
    res.repeat = r;
    res.fold = f;
    res.span = plan.folds[f];
    res.train_rows = fp.train.size();
    res.train_positives = count_positive(P.y, fp.train);
    res.purged_rows = fp.base.purged.size();
    res.test_rows = fp.test.size();
    res.test_positives = count_positive(P.y, fp.test);
    res.window_max = fp.window_max;
    for (std::size_t b = 1; b < fp.blocks; ++b) res.supplements.push_back(P.states[b]);

    if (fp.test.empty() || !both_classes(P.y, fp.test)) {
      res.excluded = true;
      res.exclusion = fp.test.empty() ? "empty test fold" : "test fold lacks one class";
      results[task] = std::move(res);
      return;
    }

    Matrix Xtr = rep.select_rows(fp.train);
    std::vector<int> ytr;
    for (auto row : fp.train) ytr.push_back(P.y[row]);
    Matrix Xte = rep.select_rows(fp.test);
    std::vector<double> p(fp.test.size(), 0.5);

    if (model.is_ensemble()) {
      if (model.smote) {
        auto bal = ensemble::smote_balance(
            Xtr, ytr, {model.smote_k, 1.0, mix_seed(task_seed, 1)});
        res.synthetic_rows = bal.synthetic;
        if (options.audit) {
          std::set<std::size_t> allowed(fp.train.begin(), fp.train.end());
          for (std::size_t i = Xtr.rows(); i < bal.origin.size(); ++i) {
            for (auto parent : {bal.origin[i].first, bal.origin[i].second}) {
              ++parent_checks[task];
              if (parent >= fp.train.size() || !allowed.count(fp.train[parent]) ||
                  ytr[parent] != bal.y[i])
                ++parent_violations[task];
            }
          }
        }
        Xtr = std::move(bal.X);
        ytr = std::move(bal.y);
      }
      if (model.kind == ModelKind::RandomForest) {
        ensemble::ForestConfig cfg{model.estimators, model.subspace, true,
                                   mix_seed(task_seed, 2), 1};
        p = ensemble::rf_train(Xtr, ytr, cfg).predict(Xte);
      } else {
        ensemble::BoostConfig cfg{model.estimators, mix_seed(task_seed, 2)};
        p = ensemble::ada_train(Xtr, ytr, cfg).predict(Xte);
      }
    } else if (model.is_neural()) {
      const auto s = features::minmax_fit(Xtr);
      Xtr = features::minmax_apply(Xtr, s);
      Xte = features::minmax_apply(Xte, s);
      neural::NetSpec spec;
      spec.arch = model.kind == ModelKind::Ffnn1   ? neural::Architecture::Ffnn1
                  : model.kind == ModelKind::Ffnn2 ? neural::Architecture::Ffnn2
                                                   : neural::Architecture::Recurrent;
      spec.inputs = m;
      spec.steps = window.kind == features::WindowKind::Stacked ? dt : 1;
      spec.hidden = model.hidden;
      spec.feature_width = model.feature_width;
      spec.cell = model.cell;
      const neural::LossConfig loss{neural::positive_fraction(ytr)};
      p = neural::train(Xtr, ytr, spec, loss, model.optimizer, mix_seed(task_seed, 3)).predict(Xte);
    }

    std::vector<int> yte;
    for (auto row : fp.test) yte.push_back(P.y[row]);
    res.auroc = stats::auroc(p, yte);
    res.auprc = stats::auprc(p, yte);
    if (options.keep_predictions)
      for (std::size_t i = 0; i < fp.test.size(); ++i) {
        const auto row = fp.test[i];
        preds[task].push_back(
            {r, f, P.states[row / n], dataset.dates[row % n], yte[i], p[i]});
      }
    results[task] = std::move(res);
  });

  report.folds = std::move(results);
  for (std::size_t t = 0; t < tasks; ++t) {
    report.audit.smote_parents_checked += parent_checks[t];
    report.audit.smote_parent_violations += parent_violations[t];
    report.predictions.insert(report.predictions.end(), preds[t].begin(), preds[t].end());
  }
  for (const auto& fp : prep)
    if (fp.fitted) report.fitted.push_back(*fp.fitted);

  std::vector<double> all, auprcs;
  std::vector<std::vector<double>> per_repeat(options.repeats);
  for (const auto& f : report.folds) {
    if (f.excluded) {
      ++report.excluded;
      continue;
    }
    all.push_back(*f.auroc);
    per_repeat[f.repeat].push_back(*f.auroc);
    if (f.auprc) auprcs.push_back(*f.auprc);
  }
  if (all.empty())
    throw std::runtime_error("run_cv: every fold was excluded for " + dataset.state + " " +
                             window.label());
  report.mean = stats::mean(all);
  report.std_all = stats::stddev(all);
  for (const auto& v : per_repeat) report.repeat_mean.push_back(stats::mean(v));
  report.std_repeats = stats::stddev(report.repeat_mean);
  std::vector<double> fold_means;
  for (std::size_t f = 0; f < k; ++f)
    if (auto fm = report.fold_mean(f)) fold_means.push_back(*fm);
  report.std_folds = stats::stddev(fold_means);
  if (!auprcs.empty()) report.mean_auprc = stats::mean(auprcs);

  report.conventions = {
      {"auroc", "mann_whitney(ties count 1/2)"},
      {"auprc", stats::kAuprcConvention},
      {"std", "population (divide by count)"},
      {"folds", "contiguous, remainder to earliest folds"},
      {"purge", "start-dt-horizon <= d <= end+dt"},
      {"ks_window", "fit on purged training rows, dt* used for purging"},
      {"boundary", "first dt days excluded"},
      {"scaler", "min-max fitted on training rows"},
      {"lr_schedule", "lr/(1+decay*iteration)"},
      {"repeats", "vary model randomness only"},
  };

  std::ostringstream fp;
  fp << "state=" << dataset.state << ";data=" << hex64(dataset_hash(P)) << ";window="
     << window.label() << ";model=" << model.describe() << ";k=" << k
     << ";repeats=" << options.repeats << ";seed=" << options.seed
     << ";horizon=" << options.label_horizon << ";extras=";
  for (const auto& s : P.states) fp << s << ',';
  fp << ";threshold=" << (options.event_threshold ? std::to_string(*options.event_threshold) : "-")
     << ";pool_test=" << options.pool_test;
  report.fingerprint = hex64(fingerprint(fp.str()));
  return report;
}

std::string report_json(const EvalReport& r) {
  ordered_json j;
  j["fingerprint"] = r.fingerprint;
  j["state"] = r.state;
  j["window"] = r.window;
  j["model"] = r.model;
  j["model_detail"] = r.model_detail;
  j["n"] = r.n;
  j["m"] = r.m;
  j["k"] = r.k;
  j["repeats"] = r.repeats;
  j["seed"] = r.seed;
  j["auroc_mean"] = r.mean;
  j["auroc_std_folds"] = r.std_folds;
  j["auroc_std_repeats"] = r.std_repeats;
  j["auroc_std_all"] = r.std_all;
  j["auprc_mean"] = opt_json(r.mean_auprc);
  j["repeat_means"] = r.repeat_mean;
  j["excluded_folds"] = r.excluded;
  ordered_json folds = ordered_json::array();
  for (const auto& f : r.folds) {
    ordered_json o;
    o["repeat"] = f.repeat;
    o["fold"] = f.fold;
    o["start"] = f.span.start;
    o["end"] = f.span.end;
    o["train_rows"] = f.train_rows;
    o["train_positives"] = f.train_positives;
    o["purged_rows"] = f.purged_rows;
    o["test_rows"] = f.test_rows;
    o["test_positives"] = f.test_positives;
    o["synthetic_rows"] = f.synthetic_rows;
    o["window_max"] = f.window_max;
    o["supplements"] = f.supplements;
    o["auroc"] = opt_json(f.auroc);
    o["auprc"] = opt_json(f.auprc);
    o["excluded"] = f.excluded;
    if (f.excluded) o["exclusion"] = f.exclusion;
    folds.push_back(std::move(o));
  }
  j["folds"] = std::move(folds);
  ordered_json audit;
  audit["folds_checked"] = r.audit.folds_checked;
  audit["window_overlaps"] = r.audit.window_overlaps;
  audit["partition_violations"] = r.audit.partition_violations;
  audit["smote_parents_checked"] = r.audit.smote_parents_checked;
  audit["smote_parent_violations"] = r.audit.smote_parent_violations;
  audit["ks_refits_checked"] = r.audit.ks_refits_checked;
  audit["ks_refit_mismatches"] = r.audit.ks_refit_mismatches;
  audit["clean"] = r.audit.clean();
  j["audit"] = std::move(audit);
  ordered_json conv;
  for (const auto& [key, v] : r.conventions) conv[key] = v;
  j["conventions"] = std::move(conv);
  return j.dump(2) + "\n";
}

std::string predictions_csv(const EvalReport& r) {
  std::string out = "# fingerprint=" + r.fingerprint + "\ndate,y,p,repeat,fold,state\n";
  for (const auto& p : r.predictions)
    out += format_date(p.date) + "," + std::to_string(p.y) + "," + text::shortest(p.p) + "," +
           std::to_string(p.repeat) + "," + std::to_string(p.fold) + "," + p.state + "\n";
  return out;
}

std::vector<Prediction> average_predictions(const EvalReport& r) {
  std::map<std::pair<std::string, Date>, std::pair<Prediction, std::size_t>> acc;
  std::vector<std::string> order;
  for (const auto& p : r.predictions) {
    auto [it, fresh] = acc.try_emplace({p.state, p.date}, p, 0);
    if (fresh) {
      it->second.first.p = 0.0;
      it->second.first.repeat = 0;
      if (std::find(order.begin(), order.end(), p.state) == order.end()) order.push_back(p.state);
    }
    it->second.first.p += p.p;
    ++it->second.second;
  }
  std::vector<Prediction> out;
  for (const auto& state : order)
    for (auto& [key, v] : acc)
      if (key.first == state) {
        Prediction p = v.first;
        p.p /= static_cast<double>(v.second);
        out.push_back(p);
      }
  return out;
}

}  // namespace eventcast::eval
