#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eventcast/core.hpp"
#include "eventcast/ensemble.hpp"
#include "eventcast/features.hpp"
#include "eventcast/ingest.hpp"
#include "eventcast/neural.hpp"

namespace eventcast::eval {

/// Contiguous block of day indices [start, end], both inclusive, 0-based.
struct Fold {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - start + 1; }
  bool contains(std::size_t d) const { return d >= start && d <= end; }
  friend bool operator==(const Fold&, const Fold&) = default;
};

struct FoldPlan {
  std::size_t n = 0;
  std::vector<Fold> folds;
  std::vector<std::size_t> sizes() const;
};

/// k contiguous folds in date order; the n % k leftover days go to the
/// earliest folds. Throws if n < k or k == 0.
FoldPlan make_folds(std::size_t n, std::size_t k = 5);

/// Training days d (outside the fold, inside [0, n)) with
/// start - dt - horizon <= d <= end + dt. `horizon` widens the left side when
/// labels look ahead (label propagation).
std::vector<std::size_t> purge_rows(const Fold& fold, std::size_t dt_effective, std::size_t n,
                                    std::size_t horizon = 0);

/// Row roles of one fold. Rows before `dt_effective` have no complete input
/// window and take no part in training or testing.
struct FoldRows {
  std::vector<std::size_t> train;
  std::vector<std::size_t> purged;
  std::vector<std::size_t> test;
};
FoldRows fold_rows(const FoldPlan& plan, std::size_t fold, std::size_t dt_effective,
                   std::size_t horizon = 0);

/// Largest window in force for a window spec (Δt, Δt*, or stacking depth).
std::size_t effective_window(const features::WindowSpec& window);

enum class Profile { Desk, Paper };
Profile parse_profile(const std::string& name);
std::string profile_name(Profile p);

enum class ModelKind { Random, RandomForest, AdaBoost, Ffnn1, Ffnn2, Recurrent };

struct ModelSpec {
  ModelKind kind = ModelKind::RandomForest;
  std::size_t estimators = 100;   // forest trees or boosting iterations
  std::size_t subspace = 0;       // 0 = ceil(sqrt(m))
  bool smote = true;              // ensembles only
  std::size_t smote_k = 5;
  std::size_t hidden = 64;
  std::size_t feature_width = 8;
  neural::Cell cell = neural::Cell::Gated;
  neural::OptimizerConfig optimizer{.learning_rate = 1e-4, .decay = 1e-6, .batch_size = 32,
                                    .epochs = 50, .momentum = 0.9};

  bool is_ensemble() const {
    return kind == ModelKind::RandomForest || kind == ModelKind::AdaBoost;
  }
  bool is_neural() const {
    return kind == ModelKind::Ffnn1 || kind == ModelKind::Ffnn2 || kind == ModelKind::Recurrent;
  }
  /// Short name: random, rf, ada, ffnn1, ffnn2, lstm, rnn.
  std::string name() const;
  /// Every hyperparameter, stable across runs; part of the config fingerprint.
  std::string describe() const;
};

/// Defaults for a model name under a profile. Desk: 100 trees/iterations,
/// 64 hidden units, 50 epochs. Paper: 3000 trees/iterations, 8000 dense
/// units, 1024 recurrent units, 100 epochs.
ModelSpec default_model(const std::string& name, Profile profile);

struct FoldResult {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  Fold span;
  std::size_t train_rows = 0;
  std::size_t train_positives = 0;
  std::size_t purged_rows = 0;
  std::size_t test_rows = 0;
  std::size_t test_positives = 0;
  std::size_t synthetic_rows = 0;
  std::size_t window_max = 0;           // largest per-feature window actually used
  std::vector<std::string> supplements; // extra states used for training
  std::optional<double> auroc;
  std::optional<double> auprc;
  bool excluded = false;
  std::string exclusion;
};

struct Prediction {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  std::string state;
  Date date;
  int y = 0;
  double p = 0.0;
};

struct AuditSummary {
  std::size_t folds_checked = 0;
  std::size_t window_overlaps = 0;
  std::size_t partition_violations = 0;
  std::size_t smote_parent_violations = 0;
  std::size_t smote_parents_checked = 0;
  std::size_t ks_refits_checked = 0;
  std::size_t ks_refit_mismatches = 0;
  bool clean() const {
    return window_overlaps == 0 && partition_violations == 0 && smote_parent_violations == 0 &&
           ks_refit_mismatches == 0;
  }
};

struct EvalReport {
  std::string state;
  std::string window;
  std::string model;
  std::string model_detail;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t k = 5;
  std::size_t repeats = 0;
  std::uint64_t seed = 0;
  std::string fingerprint;
  std::vector<FoldResult> folds;
  std::vector<double> repeat_mean;      // mean included AUROC per repeat
  double mean = 0.0;                    // over every included (repeat, fold)
  double std_folds = 0.0;               // across per-fold means (averaged over repeats)
  double std_repeats = 0.0;             // across per-repeat means
  double std_all = 0.0;                 // across every included (repeat, fold)
  std::optional<double> mean_auprc;
  std::size_t excluded = 0;
  std::vector<Prediction> predictions;
  std::vector<features::FittedWindows> fitted;  // per fold, KS windows only
  AuditSummary audit;
  std::map<std::string, std::string> conventions;

  std::optional<double> fold_mean(std::size_t fold) const;
};

struct CvOptions {
  std::size_t k = 5;
  std::size_t repeats = 10;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  /// Extra days purged on the left of each test fold (label look-ahead).
  std::size_t label_horizon = 0;
  /// Supplementary states, in the order they may be added.
  std::vector<const ingest::LocationDataset*> extras;
  /// If set, extras are added per fold (in order) only until the training
  /// positives exceed this count; otherwise every extra is used.
  std::optional<std::size_t> event_threshold;
  /// Test on the union of the base and the extras used (group testing)
  /// instead of the base state alone.
  bool pool_test = false;
  /// Run structural leakage checks and record them in the report.
  bool audit = true;
  bool keep_predictions = true;
};

/// Several same-index datasets stacked into one matrix (block b holds rows
/// b*n .. b*n+n-1), so window transforms never cross a block boundary for
/// rows past the first dt days.
struct Pooled {
  Matrix X;
  std::vector<int> y;
  std::size_t n = 0;
  std::vector<std::string> states;
};

/// Stacks base and extras. Throws if dates or feature ids differ.
Pooled pool(const ingest::LocationDataset& base,
            const std::vector<const ingest::LocationDataset*>& extras);

/// Rows of `pooled` used for training when the base training days are
/// `base_train`: the same days taken from each of the first `blocks` blocks.
/// Dates outside the base training set never enter.
std::vector<std::size_t> supplement_training(const Pooled& pooled,
                                             std::span<const std::size_t> base_train,
                                             std::size_t blocks);

/// Leakage-purged temporal cross validation with repeats. Windows, scalers
/// and SMOTE are fitted on each fold's purged training rows only.
EvalReport run_cv(const ingest::LocationDataset& dataset, const features::WindowSpec& window,
                  const ModelSpec& model, const CvOptions& options);

/// Serialized report (JSON). Predictions are left to predictions_csv.
std::string report_json(const EvalReport& report);
/// "date,y,p,repeat,fold,state" rows.
std::string predictions_csv(const EvalReport& report);

/// Mean predicted probability per (state, date) over repeats, in date order.
std::vector<Prediction> average_predictions(const EvalReport& report);

}  // namespace eventcast::eval
