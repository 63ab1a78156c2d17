#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "eventcast/eval.hpp"
#include "eventcast/ingest.hpp"

namespace eventcast::experiments {

/// Flat "key = value" configuration. '#' starts a comment line. Unknown keys
/// are rejected so that typos do not silently fall back to defaults.
class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);
  /// Every key the commands understand, with a one-line description.
  static const std::map<std::string, std::string>& schema();

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list; empty entries dropped.
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback) const;

  /// Sorted key=value lines, without keys that cannot change results
  /// (threads). Feeds the fingerprint.
  std::string canonical() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct RunContext {
  Config config;
  std::uint64_t seed = 0;
  eval::Profile profile = eval::Profile::Desk;
  std::filesystem::path out = "out";
  unsigned threads = 1;
  std::ostream* log = nullptr;  // progress notes; may be null
};

struct CommandResult {
  std::string command;
  std::string fingerprint;
  std::vector<std::filesystem::path> files;
  std::string summary;  // human-readable, printed by the CLI
};

const std::vector<std::string>& command_names();
/// Runs one subcommand, writing its reports under ctx.out. A "<command>.log"
/// sidecar holds wall-clock timings; every other file is a pure function of
/// the config, seed and profile.
CommandResult run_command(const std::string& name, const RunContext& ctx);

/// hex fingerprint of (command, seed, profile, canonical config).
std::string command_fingerprint(const std::string& command, const RunContext& ctx);

/// "rf:dt*=14" -> model and window under the context's profile and overrides.
std::pair<eval::ModelSpec, features::WindowSpec> parse_run_spec(const std::string& text,
                                                                 const RunContext& ctx);
eval::ModelSpec model_from_config(const std::string& name, const RunContext& ctx);

/// Rows of the summary grid: random baseline, RF and AdaBoost at dt=1, dt=14,
/// dt*=14; FFNN L=1 stacked 1 and 7, FFNN L=2 stacked 7, FFNN L=1 dt*=7;
/// recurrent stacked 7.
const std::vector<std::string>& baseline_grid();

/// Per-state attack counts of the reference period (2015-02-18 .. 2018-12-31).
const std::vector<std::pair<std::string, std::size_t>>& reference_attack_counts();
inline constexpr std::size_t kReferenceDays = 1413;
/// Reference numbers printed next to our results; never asserted.
std::string reference_manifest_json();
/// "mean ± std" reference cell for (model, window, state) of the grid, if any.
std::optional<std::string> reference_cell(const std::string& model, const std::string& window,
                                          const std::string& state);

struct CoarseDemo {
  std::size_t states = 0;
  std::size_t days = 0;
  std::size_t instances = 0;
  std::size_t positives = 0;
  std::size_t flagged_instances = 0;  // scored 1
  std::size_t flagged_positives = 0;
  double auroc = 0.0;
  double auprc = 0.0;
  double baseline_auroc = 0.0;  // constant score
  double baseline_auprc = 0.0;  // constant score = prevalence
  double prevalence = 0.0;
  std::vector<std::string> flagged;
};

/// Every state-day is an instance; the "always attack" model scores 1 for the
/// flagged states and 0 elsewhere. `positives_by_state` may omit states
/// (treated as 0). Positive days are spread evenly inside each state.
CoarseDemo coarse_demo(const std::map<std::string, std::size_t>& positives_by_state,
                       std::size_t days, const std::vector<std::string>& flagged);

/// Label vectors for one state built from a count of attack days spread over
/// `days`; used for the imbalance arithmetic.
std::vector<int> labels_from_count(std::size_t count, std::size_t days);

/// Datasets named by the config (data_dir) or generated from synth.* keys.
std::vector<ingest::LocationDataset> load_datasets(const RunContext& ctx);
ingest::SynthConfig synth_config(const RunContext& ctx);

}  // namespace eventcast::experiments
