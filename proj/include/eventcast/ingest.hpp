#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "eventcast/core.hpp"

namespace eventcast::ingest {

/// Two-letter codes of the 50 states plus DC, alphabetical.
const std::vector<std::string>& state_codes();
bool is_state_code(std::string_view code);
/// Accepts a two-letter code or a full state name ("New York", "District of Columbia").
std::optional<std::string> resolve_state(std::string_view name_or_code);

enum class FeatureGroup { ThemeCount, ThemeSentiment, CameoCount, CameoSentiment };

std::string_view group_name(FeatureGroup g);
FeatureGroup parse_group(std::string_view name);

struct FeatureId {
  FeatureGroup group = FeatureGroup::ThemeCount;
  std::string key;

  /// "<Group>:<key>", e.g. "ThemeCount:TERROR".
  std::string name() const;
  static FeatureId parse(std::string_view name);
  friend bool operator==(const FeatureId&, const FeatureId&) = default;
};

/// Theme and CAMEO base-code manifests. The canonical registry holds 283 theme
/// keys and 148 base codes, giving 862 features in the fixed order
/// ThemeCount, ThemeSentiment, CameoCount, CameoSentiment.
class FeatureRegistry {
 public:
  FeatureRegistry(std::vector<std::string> themes, std::vector<std::string> cameo_codes);

  static const FeatureRegistry& canonical();
  /// Reads manifests: one key per line, '#' starts a comment.
  static FeatureRegistry load(const std::filesystem::path& themes,
                              const std::filesystem::path& cameo_codes);

  const std::vector<std::string>& themes() const { return themes_; }
  const std::vector<std::string>& cameo_codes() const { return cameo_; }
  std::size_t feature_count() const { return 2 * themes_.size() + 2 * cameo_.size(); }
  std::vector<FeatureId> feature_ids() const;

  std::optional<std::size_t> theme_index(std::string_view key) const;
  std::optional<std::size_t> cameo_index(std::string_view code) const;

 private:
  std::vector<std::string> themes_;
  std::vector<std::string> cameo_;
  std::unordered_map<std::string, std::size_t> theme_lookup_;
  std::unordered_map<std::string, std::size_t> cameo_lookup_;
};

struct NewsRecord {
  Date publish_date;
  std::string state;
  std::vector<std::string> themes;
  std::optional<std::string> cameo_base_code;
  double tone = 0.0;
};

enum class NewsFormat { Gkg, Events };

struct ParseStats {
  std::size_t rows = 0;
  std::size_t malformed = 0;
  std::size_t unresolved_state = 0;
};

template <class Record>
struct ParseResult {
  std::vector<Record> records;
  ParseStats stats;
};

/// Parses a tab-delimited GKG or Events file. A row that mentions several
/// states yields one record per state. Malformed rows and rows without a
/// recognised state are counted and skipped. Throws if the file is missing.
ParseResult<NewsRecord> parse_news_file(const std::filesystem::path& path, NewsFormat format);
ParseResult<NewsRecord> parse_news_text(std::string_view text, NewsFormat format);

/// Daily feature rows for one state over `dates` (gap-free, ascending).
/// Counts are record counts; sentiments are the mean tone of those records,
/// 0 on days without records. Records outside the range or registry are ignored.
Matrix build_daily_features(const std::vector<NewsRecord>& records, std::string_view state,
                            const std::vector<Date>& dates,
                            const FeatureRegistry& registry = FeatureRegistry::canonical());

struct IncidentRecord {
  std::string eventid;
  std::string state;
  Date date;
  std::string attack_type;
  std::string weapon_type;
  std::string target_type;
  std::string group_name;
  bool success = false;
};

/// Parses a comma-separated incident file with a header row. Rows whose state
/// or full date (iday = 0) cannot be resolved are skipped and counted.
ParseResult<IncidentRecord> parse_incidents(const std::filesystem::path& path);
ParseResult<IncidentRecord> parse_incidents_text(std::string_view text);
/// A non-empty comment becomes a leading '#' line, which the parser skips.
void write_incidents(const std::filesystem::path& path, const std::vector<IncidentRecord>& rows,
                     std::string_view comment = {});

/// y_i = 1 iff at least one incident falls on (state, dates_i).
std::vector<int> label_vector(const std::vector<IncidentRecord>& incidents, std::string_view state,
                              const std::vector<Date>& dates);

/// Count of distinct (state, date) pairs among incidents inside [first, last].
std::size_t unique_incident_days(const std::vector<IncidentRecord>& incidents, Date first,
                                 Date last);

struct LocationDataset {
  std::string state;
  std::vector<Date> dates;
  Matrix X;
  std::vector<int> y;
  std::vector<FeatureId> features;

  std::size_t n() const { return dates.size(); }
  std::size_t m() const { return features.size(); }
  std::size_t positives() const;
  double imbalance() const;
  /// Throws std::invalid_argument when an invariant does not hold.
  void validate() const;
  /// Copy restricted to the given feature columns.
  LocationDataset with_features(const std::vector<std::size_t>& columns) const;
};

/// Writes "date,y,<feature ids...>" then one row per day. Lines starting with
/// '#' before the header are comments (used for provenance). Values are
/// written in shortest round-trip form, so read(write(d)) == d bit-for-bit.
void write_dataset(const std::filesystem::path& path, const LocationDataset& ds,
                   std::string_view comment = {});
LocationDataset read_dataset(const std::filesystem::path& path, std::string state = {});
std::string dataset_to_csv(const LocationDataset& ds, std::string_view comment = {});
LocationDataset dataset_from_csv(std::string_view text, std::string state);

struct PlantedSignal {
  std::size_t window_len = 7;
  double affected_fraction = 0.25;
  double shift_magnitude = 3.0;  // in units of the noise standard deviation
  /// Restrict the affected features to one group.
  std::optional<FeatureGroup> group;
};

struct SynthConfig {
  std::size_t n_days = 800;
  std::size_t m_features = 40;
  std::size_t n_states = 1;
  double imbalance = 0.02;
  std::optional<PlantedSignal> signal;  // nullopt = no signal
  std::uint64_t seed = 0;
  Date start = make_date(2015, 2, 18);

  void validate() const;
  std::string describe() const;
};

/// Feature ids for a synthetic matrix of width m: the canonical ids when m is
/// 862, otherwise the four groups sized proportionally to 283:283:148:148.
std::vector<FeatureId> synthetic_feature_ids(std::size_t m);

/// Deterministic synthetic datasets. Features are iid N(0,1); with a planted
/// signal the affected features are shifted on the window_len days before
/// each positive day. States are taken in descending order of real attack
/// frequency (CA, NY, TX, ...).
std::vector<LocationDataset> synth_generate(const SynthConfig& config);

/// Indices of the features carrying the planted signal for state `state_index`.
std::vector<std::size_t> synth_affected_features(const SynthConfig& config,
                                                 std::size_t state_index);

/// Incident rows (one per positive day) with random categorical attributes,
/// so the characteristics analysis can run on synthetic data.
std::vector<IncidentRecord> synth_incidents(const std::vector<LocationDataset>& datasets,
                                            std::uint64_t seed);

/// State order used by the generator and by the reference attack counts.
const std::vector<std::string>& states_by_attack_frequency();

}  // namespace eventcast::ingest
