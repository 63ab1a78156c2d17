#include "eventcast/ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "registry_data.hpp"
#include "text.hpp"

namespace eventcast::ingest {

namespace {

struct StateName {
  const char* code;
  const char* name;
};

constexpr std::array<StateName, 51> kStates{{
    {"AK", "Alaska"},        {"AL", "Alabama"},        {"AR", "Arkansas"},
    {"AZ", "Arizona"},       {"CA", "California"},     {"CO", "Colorado"},
    {"CT", "Connecticut"},   {"DC", "District of Columbia"}, {"DE", "Delaware"},
    {"FL", "Florida"},       {"GA", "Georgia"},        {"HI", "Hawaii"},
    {"IA", "Iowa"},          {"ID", "Idaho"},          {"IL", "Illinois"},
    {"IN", "Indiana"},       {"KS", "Kansas"},         {"KY", "Kentucky"},
    {"LA", "Louisiana"},     {"MA", "Massachusetts"},  {"MD", "Maryland"},
    {"ME", "Maine"},         {"MI", "Michigan"},       {"MN", "Minnesota"},
    {"MO", "Missouri"},      {"MS", "Mississippi"},    {"MT", "Montana"},
    {"NC", "North Carolina"}, {"ND", "North Dakota"},  {"NE", "Nebraska"},
    {"NH", "New Hampshire"}, {"NJ", "New Jersey"},     {"NM", "New Mexico"},
    {"NV", "Nevada"},        {"NY", "New York"},       {"OH", "Ohio"},
    {"OK", "Oklahoma"},      {"OR", "Oregon"},         {"PA", "Pennsylvania"},
    {"RI", "Rhode Island"},  {"SC", "South Carolina"}, {"SD", "South Dakota"},
    {"TN", "Tennessee"},     {"TX", "Texas"},          {"UT", "Utah"},
    {"VA", "Virginia"},      {"VT", "Vermont"},        {"WA", "Washington"},
    {"WI", "Wisconsin"},     {"WV", "West Virginia"},  {"WY", "Wyoming"},
}};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> parse_manifest(std::string_view content) {
  std::vector<std::string> keys;
  for (auto line : text::lines(content)) {
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (!line.empty()) keys.emplace_back(line);
  }
  return keys;
}

// Column positions of the GDELT 2.x layouts, used when the file has no header.
constexpr std::size_t kGkgDate = 1, kGkgThemes = 7, kGkgV2Themes = 8, kGkgLocations = 9,
                      kGkgV2Locations = 10, kGkgTone = 15;
constexpr std::size_t kEvSqlDate = 1, kEvBaseCode = 27, kEvAvgTone = 34,
                      kEvActionFullName = 52, kEvActionCountry = 53, kEvActionAdm1 = 54;

struct Columns {
  std::optional<std::size_t> date, themes, v2themes, locations, v2locations, tone;
  std::optional<std::size_t> base_code, geo_fullname, geo_country, geo_adm1;
};

std::optional<std::size_t> find_col(const std::vector<std::string_view>& header,
                                    std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (lower(text::trim(header[i])) == lower(name)) return i;
  return std::nullopt;
}

Columns header_columns(const std::vector<std::string_view>& header, NewsFormat format) {
  Columns c;
  if (format == NewsFormat::Gkg) {
    c.date = find_col(header, "DATE");
    c.themes = find_col(header, "Themes");
    c.v2themes = find_col(header, "V2Themes");
    c.locations = find_col(header, "Locations");
    c.v2locations = find_col(header, "V2Locations");
    c.tone = find_col(header, "V2Tone");
    if (!c.tone) c.tone = find_col(header, "Tone");
  } else {
    c.date = find_col(header, "SQLDATE");
    c.base_code = find_col(header, "EventBaseCode");
    c.tone = find_col(header, "AvgTone");
    c.geo_fullname = find_col(header, "ActionGeo_FullName");
    c.geo_country = find_col(header, "ActionGeo_CountryCode");
    c.geo_adm1 = find_col(header, "ActionGeo_ADM1Code");
  }
  return c;
}

Columns positional_columns(NewsFormat format) {
  Columns c;
  if (format == NewsFormat::Gkg) {
    c.date = kGkgDate;
    c.themes = kGkgThemes;
    c.v2themes = kGkgV2Themes;
    c.locations = kGkgLocations;
    c.v2locations = kGkgV2Locations;
    c.tone = kGkgTone;
  } else {
    c.date = kEvSqlDate;
    c.base_code = kEvBaseCode;
    c.tone = kEvAvgTone;
    c.geo_fullname = kEvActionFullName;
    c.geo_country = kEvActionCountry;
    c.geo_adm1 = kEvActionAdm1;
  }
  return c;
}

std::string_view field(const std::vector<std::string_view>& row, std::optional<std::size_t> idx) {
  if (!idx || *idx >= row.size()) return {};
  return text::trim(row[*idx]);
}

// A US first-order division code such as "USNY".
std::optional<std::string> state_from_adm1(std::string_view adm1) {
  if (adm1.size() == 4 && adm1.substr(0, 2) == "US") {
    std::string code(adm1.substr(2));
    if (is_state_code(code)) return code;
  }
  return std::nullopt;
}

// The state component of a "City, State, Country" style name.
std::optional<std::string> state_from_fullname(std::string_view full) {
  auto parts = text::split(full, ',');
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    auto part = text::trim(*it);
    if (part.empty() || lower(part) == "united states") continue;
    if (part.size() > 2)
      if (auto s = resolve_state(part)) return s;
  }
  return std::nullopt;
}

// GKG location blocks: entries separated by ';' (or '|'), fields by '#':
// type#fullname#country#adm1#...; a bare name is treated as a fullname.
std::vector<std::string> states_in_locations(std::string_view block) {
  std::vector<std::string> states;
  std::string normalized(block);
  std::replace(normalized.begin(), normalized.end(), '|', ';');
  for (auto entry : text::split(normalized, ';')) {
    entry = text::trim(entry);
    if (entry.empty()) continue;
    auto fields = text::split(entry, '#');
    std::optional<std::string> state;
    if (fields.size() >= 4) state = state_from_adm1(text::trim(fields[3]));
    if (!state) state = state_from_fullname(fields.size() >= 2 ? fields[1] : fields[0]);
    if (state && std::find(states.begin(), states.end(), *state) == states.end())
      states.push_back(*state);
  }
  return states;
}

std::vector<std::string> themes_in(std::string_view block) {
  std::vector<std::string> out;
  for (auto entry : text::split(block, ';')) {
    if (auto comma = entry.find(','); comma != std::string_view::npos) entry = entry.substr(0, comma);
    entry = text::trim(entry);
    if (!entry.empty() && std::find(out.begin(), out.end(), entry) == out.end())
      out.emplace_back(entry);
  }
  return out;
}

bool looks_like_header(const std::vector<std::string_view>& row, NewsFormat format) {
  const auto c = header_columns(row, format);
  return c.date.has_value();
}

}  // namespace

const std::vector<std::string>& state_codes() {
  static const std::vector<std::string> codes = [] {
    std::vector<std::string> v;
    for (const auto& s : kStates) v.emplace_back(s.code);
    return v;
  }();
  return codes;
}

bool is_state_code(std::string_view code) {
  return std::any_of(kStates.begin(), kStates.end(),
                     [&](const StateName& s) { return code == s.code; });
}

std::optional<std::string> resolve_state(std::string_view name_or_code) {
  auto s = text::trim(name_or_code);
  if (s.size() == 2) {
    std::string upper(s);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (is_state_code(upper)) return upper;
  }
  const auto key = lower(s);
  for (const auto& st : kStates)
    if (lower(st.name) == key) return std::string(st.code);
  if (key == "washington, d.c." || key == "washington dc" || key == "washington d.c.")
    return std::string("DC");
  return std::nullopt;
}

std::string_view group_name(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::ThemeCount: return "ThemeCount";
    case FeatureGroup::ThemeSentiment: return "ThemeSentiment";
    case FeatureGroup::CameoCount: return "CameoCount";
    case FeatureGroup::CameoSentiment: return "CameoSentiment";
  }
  return "?";
}

FeatureGroup parse_group(std::string_view name) {
  for (auto g : {FeatureGroup::ThemeCount, FeatureGroup::ThemeSentiment, FeatureGroup::CameoCount,
                 FeatureGroup::CameoSentiment})
    if (group_name(g) == name) return g;
  throw std::invalid_argument("unknown feature group: " + std::string(name));
}

std::string FeatureId::name() const { return std::string(group_name(group)) + ":" + key; }

FeatureId FeatureId::parse(std::string_view name) {
  const auto colon = name.find(':');
  if (colon == std::string_view::npos)
    throw std::invalid_argument("feature id without group: " + std::string(name));
  return {parse_group(name.substr(0, colon)), std::string(name.substr(colon + 1))};
}

FeatureRegistry::FeatureRegistry(std::vector<std::string> themes,
                                 std::vector<std::string> cameo_codes)
    : themes_(std::move(themes)), cameo_(std::move(cameo_codes)) {
  for (std::size_t i = 0; i < themes_.size(); ++i)
    if (!theme_lookup_.emplace(themes_[i], i).second)
      throw std::invalid_argument("duplicate theme key: " + themes_[i]);
  for (std::size_t i = 0; i < cameo_.size(); ++i)
    if (!cameo_lookup_.emplace(cameo_[i], i).second)
      throw std::invalid_argument("duplicate CAMEO code: " + cameo_[i]);
}

const FeatureRegistry& FeatureRegistry::canonical() {
  static const FeatureRegistry registry(parse_manifest(detail::kThemeManifest),
                                        parse_manifest(detail::kCameoManifest));
  return registry;
}

FeatureRegistry FeatureRegistry::load(const std::filesystem::path& themes,
                                      const std::filesystem::path& cameo_codes) {
  return FeatureRegistry(parse_manifest(text::read_file(themes.string())),
                         parse_manifest(text::read_file(cameo_codes.string())));
}

std::vector<FeatureId> FeatureRegistry::feature_ids() const {
  std::vector<FeatureId> ids;
  ids.reserve(feature_count());
  for (const auto& t : themes_) ids.push_back({FeatureGroup::ThemeCount, t});
  for (const auto& t : themes_) ids.push_back({FeatureGroup::ThemeSentiment, t});
  for (const auto& c : cameo_) ids.push_back({FeatureGroup::CameoCount, c});
  for (const auto& c : cameo_) ids.push_back({FeatureGroup::CameoSentiment, c});
  return ids;
}

std::optional<std::size_t> FeatureRegistry::theme_index(std::string_view key) const {
  auto it = theme_lookup_.find(std::string(key));
  if (it == theme_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> FeatureRegistry::cameo_index(std::string_view code) const {
  auto it = cameo_lookup_.find(std::string(code));
  if (it == cameo_lookup_.end()) return std::nullopt;
  return it->second;
}

ParseResult<NewsRecord> parse_news_text(std::string_view content, NewsFormat format) {
  ParseResult<NewsRecord> out;
  auto rows = text::lines(content);
  Columns cols = positional_columns(format);
  std::size_t first = 0;
  if (!rows.empty()) {
    auto head = text::split(rows[0], '\t');
    if (looks_like_header(head, format)) {
      cols = header_columns(head, format);
      first = 1;
    }
  }

  for (std::size_t r = first; r < rows.size(); ++r) {
    if (text::trim(rows[r]).empty()) continue;
    ++out.stats.rows;
    const auto row = text::split(rows[r], '\t');
    NewsRecord rec;
    try {
      rec.publish_date = parse_date(field(row, cols.date));
    } catch (const std::exception&) {
      ++out.stats.malformed;
      continue;
    }
    auto tone_field = field(row, cols.tone);
    if (auto comma = tone_field.find(','); comma != std::string_view::npos)
      tone_field = tone_field.substr(0, comma);
    const auto tone = text::to_double(tone_field);
    if (!tone || !std::isfinite(*tone)) {
      ++out.stats.malformed;
      continue;
    }
    rec.tone = *tone;

    std::vector<std::string> states;
    if (format == NewsFormat::Gkg) {
      auto themes = field(row, cols.v2themes);
      if (themes.empty()) themes = field(row, cols.themes);
      rec.themes = themes_in(themes);
      auto locations = field(row, cols.v2locations);
      if (locations.empty()) locations = field(row, cols.locations);
      states = states_in_locations(locations);
    } else {
      const auto code = field(row, cols.base_code);
      if (code.empty()) {
        ++out.stats.malformed;
        continue;
      }
      rec.cameo_base_code = std::string(code);
      std::optional<std::string> state = state_from_adm1(field(row, cols.geo_adm1));
      if (!state) {
        const auto adm1 = field(row, cols.geo_adm1);
        if (adm1.size() == 2 && field(row, cols.geo_country) == "US") state = resolve_state(adm1);
      }
      if (!state) state = state_from_fullname(field(row, cols.geo_fullname));
      if (state) states.push_back(*state);
    }
    if (states.empty()) {
      ++out.stats.unresolved_state;
      continue;
    }
    for (auto& s : states) {
      NewsRecord copy = rec;
      copy.state = std::move(s);
      out.records.push_back(std::move(copy));
    }
  }
  return out;
}

ParseResult<NewsRecord> parse_news_file(const std::filesystem::path& path, NewsFormat format) {
  if (!std::filesystem::exists(path))
    throw std::runtime_error("news file not found: " + path.string());
  return parse_news_text(text::read_file(path.string()), format);
}

Matrix build_daily_features(const std::vector<NewsRecord>& records, std::string_view state,
                            const std::vector<Date>& dates, const FeatureRegistry& registry) {
  const std::size_t themes = registry.themes().size();
  const std::size_t codes = registry.cameo_codes().size();
  Matrix X(dates.size(), registry.feature_count());
  if (dates.empty()) return X;
  for (std::size_t i = 1; i < dates.size(); ++i)
    if (dates[i] - dates[i - 1] != std::chrono::days{1})
      throw std::invalid_argument("build_daily_features: dates must be gap-free ascending");

  const Date first = dates.front();
  const Date last = dates.back();
  const std::size_t theme_sent = themes;
  const std::size_t cameo_count = 2 * themes;
  const std::size_t cameo_sent = 2 * themes + codes;

  // Accumulate tone sums in the sentiment columns, divide by counts at the end.
  for (const auto& rec : records) {
    if (rec.state != state || rec.publish_date < first || rec.publish_date > last) continue;
    const auto row = static_cast<std::size_t>((rec.publish_date - first).count());
    for (const auto& t : rec.themes) {
      if (auto j = registry.theme_index(t)) {
        X(row, *j) += 1.0;
        X(row, theme_sent + *j) += rec.tone;
      }
    }
    if (rec.cameo_base_code) {
      if (auto j = registry.cameo_index(*rec.cameo_base_code)) {
        X(row, cameo_count + *j) += 1.0;
        X(row, cameo_sent + *j) += rec.tone;
      }
    }
  }
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (std::size_t j = 0; j < themes; ++j)
      if (X(r, j) > 0) X(r, theme_sent + j) /= X(r, j);
    for (std::size_t j = 0; j < codes; ++j)
      if (X(r, cameo_count + j) > 0) X(r, cameo_sent + j) /= X(r, cameo_count + j);
  }
  return X;
}

ParseResult<IncidentRecord> parse_incidents_text(std::string_view content) {
  ParseResult<IncidentRecord> out;
  while (content.starts_with('#')) {
    const auto nl = content.find('\n');
    content = nl == std::string_view::npos ? std::string_view{} : content.substr(nl + 1);
  }
  const auto rows = text::parse_csv(content);
  if (rows.empty()) return out;
  const auto& header = rows[0];
  auto col = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (lower(text::trim(header[i])) == lower(name)) return i;
    return std::nullopt;
  };
  const auto c_id = col("eventid"), c_year = col("iyear"), c_month = col("imonth"),
             c_day = col("iday"), c_state = col("provstate"), c_attack = col("attacktype1_txt"),
             c_weapon = col("weaptype1_txt"), c_target = col("targtype1_txt"),
             c_group = col("gname"), c_success = col("success");
  if (!c_year || !c_month || !c_day || !c_state)
    throw std::runtime_error("incident file lacks iyear/imonth/iday/provstate columns");

  auto get = [](const std::vector<std::string>& row, std::optional<std::size_t> c) -> std::string {
    if (!c || *c >= row.size()) return {};
    return std::string(text::trim(row[*c]));
  };
  auto category = [&](const std::vector<std::string>& row, std::optional<std::size_t> c) {
    auto v = get(row, c);
    return v.empty() ? std::string("Unknown") : v;
  };

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && text::trim(row[0]).empty()) continue;
    ++out.stats.rows;
    const auto year = text::to_int(get(row, c_year));
    const auto month = text::to_int(get(row, c_month));
    const auto day = text::to_int(get(row, c_day));
    if (!year || !month || !day || *month < 1 || *day < 1) {
      ++out.stats.malformed;
      continue;
    }
    IncidentRecord rec;
    try {
      rec.date = make_date(static_cast<int>(*year), static_cast<unsigned>(*month),
                           static_cast<unsigned>(*day));
    } catch (const std::exception&) {
      ++out.stats.malformed;
      continue;
    }
    auto state = resolve_state(get(row, c_state));
    if (!state) {
      ++out.stats.unresolved_state;
      continue;
    }
    rec.state = *state;
    rec.eventid = get(row, c_id);
    rec.attack_type = category(row, c_attack);
    rec.weapon_type = category(row, c_weapon);
    rec.target_type = category(row, c_target);
    rec.group_name = category(row, c_group);
    rec.success = get(row, c_success) == "1";
    out.records.push_back(std::move(rec));
  }
  return out;
}

ParseResult<IncidentRecord> parse_incidents(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw std::runtime_error("incident file not found: " + path.string());
  return parse_incidents_text(text::read_file(path.string()));
}

void write_incidents(const std::filesystem::path& path, const std::vector<IncidentRecord>& rows,
                     std::string_view comment) {
  std::ostringstream out;
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "eventid,iyear,imonth,iday,provstate,attacktype1_txt,weaptype1_txt,targtype1_txt,gname,"
         "success\n";
  for (const auto& r : rows) {
    std::chrono::year_month_day ymd{r.date};
    const auto name = std::find_if(kStates.begin(), kStates.end(),
                                   [&](const StateName& s) { return r.state == s.code; });
    out << text::csv_escape(r.eventid) << ',' << int(ymd.year()) << ',' << unsigned(ymd.month())
        << ',' << unsigned(ymd.day()) << ','
        << text::csv_escape(name != kStates.end() ? name->name : r.state) << ','
        << text::csv_escape(r.attack_type) << ',' << text::csv_escape(r.weapon_type) << ','
        << text::csv_escape(r.target_type) << ',' << text::csv_escape(r.group_name) << ','
        << (r.success ? 1 : 0) << '\n';
  }
  text::write_file(path.string(), out.str());
}

std::vector<int> label_vector(const std::vector<IncidentRecord>& incidents, std::string_view state,
                              const std::vector<Date>& dates) {
  std::vector<int> y(dates.size(), 0);
  if (dates.empty()) return y;
  const Date first = dates.front();
  for (const auto& inc : incidents) {
    if (inc.state != state || inc.date < first || inc.date > dates.back()) continue;
    const auto i = static_cast<std::size_t>((inc.date - first).count());
    if (i < y.size() && dates[i] == inc.date) y[i] = 1;
  }
  return y;
}

std::size_t unique_incident_days(const std::vector<IncidentRecord>& incidents, Date first,
                                 Date last) {
  std::set<std::pair<std::string, Date>> seen;
  for (const auto& inc : incidents)
    if (inc.date >= first && inc.date <= last) seen.emplace(inc.state, inc.date);
  return seen.size();
}

std::size_t LocationDataset::positives() const {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
}

double LocationDataset::imbalance() const {
  return dates.empty() ? 0.0 : static_cast<double>(positives()) / static_cast<double>(n());
}

void LocationDataset::validate() const {
  if (X.rows() != dates.size()) throw std::invalid_argument("dataset: X rows != dates");
  if (y.size() != dates.size()) throw std::invalid_argument("dataset: y length != dates");
  if (X.cols() != features.size()) throw std::invalid_argument("dataset: X cols != features");
  // Gap-free at the dataset's resolution: one day, or a block of days after
  // date aggregation.
  for (std::size_t i = 1; i < dates.size(); ++i)
    if (dates[i] <= dates[i - 1] || dates[i] - dates[i - 1] != dates[1] - dates[0])
      throw std::invalid_argument("dataset: dates must be strictly ascending and gap-free");
  for (int v : y)
    if (v != 0 && v != 1) throw std::invalid_argument("dataset: labels must be 0/1");
}

LocationDataset LocationDataset::with_features(const std::vector<std::size_t>& columns) const {
  LocationDataset out{state, dates, X.select_cols(columns), y, {}};
  for (auto c : columns) out.features.push_back(features.at(c));
  return out;
}

std::string dataset_to_csv(const LocationDataset& ds, std::string_view comment) {
  ds.validate();
  std::string out;
  if (!comment.empty())
    for (auto line : text::lines(comment)) out += "# " + std::string(line) + "\n";
  out += "date,y";
  for (const auto& f : ds.features) out += "," + f.name();
  out += "\n";
  for (std::size_t i = 0; i < ds.n(); ++i) {
    out += format_date(ds.dates[i]);
    out += ds.y[i] ? ",1" : ",0";
    for (double v : ds.X.row(i)) {
      out += ',';
      out += text::shortest(v);
    }
    out += '\n';
  }
  return out;
}

LocationDataset dataset_from_csv(std::string_view content, std::string state) {
  LocationDataset ds;
  ds.state = std::move(state);
  bool have_header = false;
  for (auto line : text::lines(content)) {
    if (line.empty() || line.front() == '#') continue;
    const auto cells = text::split(line, ',');
    if (!have_header) {
      if (cells.size() < 2 || cells[0] != "date" || cells[1] != "y")
        throw std::invalid_argument("dataset: header must start with date,y");
      for (std::size_t j = 2; j < cells.size(); ++j) ds.features.push_back(FeatureId::parse(cells[j]));
      ds.X = Matrix(0, ds.features.size());
      have_header = true;
      continue;
    }
    if (cells.size() != ds.features.size() + 2)
      throw std::invalid_argument("dataset: row width mismatch");
    ds.dates.push_back(parse_date(cells[0]));
    const auto label = text::to_int(cells[1]);
    if (!label) throw std::invalid_argument("dataset: bad label");
    ds.y.push_back(static_cast<int>(*label));
    std::vector<double> row(ds.features.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
      auto v = text::to_double(cells[j + 2]);
      if (!v) throw std::invalid_argument("dataset: bad value '" + std::string(cells[j + 2]) + "'");
      row[j] = *v;
    }
    ds.X.append_row(row);
  }
  if (!have_header) throw std::invalid_argument("dataset: missing header");
  ds.validate();
  return ds;
}

void write_dataset(const std::filesystem::path& path, const LocationDataset& ds,
                   std::string_view comment) {
  text::write_file(path.string(), dataset_to_csv(ds, comment));
}

LocationDataset read_dataset(const std::filesystem::path& path, std::string state) {
  if (state.empty()) state = path.stem().string();
  return dataset_from_csv(text::read_file(path.string()), std::move(state));
}

const std::vector<std::string>& states_by_attack_frequency() {
  // Descending attack counts 2015-02-18..2018-12-31; ties alphabetical.
  static const std::vector<std::string> order{
      "CA", "NY", "TX", "FL", "WA", "LA", "MO", "NV", "PA", "IN", "NC", "TN", "VA",
      "CO", "IA", "MS", "NM", "GA", "IL", "KY", "MA", "MN", "ND", "OH", "OR", "AZ",
      "DC", "MD", "MI", "NE", "NJ", "SC", "UT", "WI", "CT", "DE", "ID", "KS", "MT",
      "WY", "AK", "AL", "AR", "HI", "ME", "NH", "OK", "RI", "SD", "VT", "WV"};
  return order;
}

void SynthConfig::validate() const {
  if (n_days == 0 || m_features == 0 || n_states == 0)
    throw std::invalid_argument("synth: n_days, m_features, n_states must be positive");
  if (n_states > 51) throw std::invalid_argument("synth: at most 51 states");
  if (!(imbalance > 0.0 && imbalance < 1.0))
    throw std::invalid_argument("synth: imbalance must lie in (0,1)");
  if (imbalance * static_cast<double>(n_days) < 1.0)
    throw std::invalid_argument("synth: imbalance x n_days < 1, no positives representable");
  if (signal) {
    if (signal->window_len < 1) throw std::invalid_argument("synth: window_len must be >= 1");
    if (signal->affected_fraction < 0.0 || signal->affected_fraction > 1.0)
      throw std::invalid_argument("synth: affected_fraction must lie in [0,1]");
  }
}

std::string SynthConfig::describe() const {
  std::ostringstream s;
  s << "synth n_days=" << n_days << " m=" << m_features << " states=" << n_states
    << " imbalance=" << text::shortest(imbalance) << " seed=" << seed
    << " start=" << format_date(start);
  if (signal) {
    s << " signal=planted(window_len=" << signal->window_len
      << ",fraction=" << text::shortest(signal->affected_fraction)
      << ",shift=" << text::shortest(signal->shift_magnitude);
    if (signal->group) s << ",group=" << group_name(*signal->group);
    s << ")";
  } else {
    s << " signal=none";
  }
  return s.str();
}

std::vector<FeatureId> synthetic_feature_ids(std::size_t m) {
  const auto& reg = FeatureRegistry::canonical();
  if (m == reg.feature_count()) return reg.feature_ids();
  // Largest-remainder split of m over 283:283:148:148.
  const std::array<double, 4> weights{283, 283, 148, 148};
  std::array<std::size_t, 4> sizes{};
  std::array<double, 4> rem{};
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < 4; ++g) {
    const double exact = static_cast<double>(m) * weights[g] / 862.0;
    sizes[g] = static_cast<std::size_t>(std::floor(exact));
    rem[g] = exact - static_cast<double>(sizes[g]);
    assigned += sizes[g];
  }
  while (assigned < m) {
    std::size_t best = 0;
    for (std::size_t g = 1; g < 4; ++g)
      if (rem[g] > rem[best]) best = g;
    ++sizes[best];
    rem[best] = -1.0;
    ++assigned;
  }
  std::vector<FeatureId> ids;
  const std::array<FeatureGroup, 4> groups{FeatureGroup::ThemeCount, FeatureGroup::ThemeSentiment,
                                           FeatureGroup::CameoCount, FeatureGroup::CameoSentiment};
  for (std::size_t g = 0; g < 4; ++g) {
    const auto& keys = g < 2 ? reg.themes() : reg.cameo_codes();
    for (std::size_t k = 0; k < sizes[g]; ++k) {
      const std::string key = k < keys.size() ? keys[k] : "SYN" + std::to_string(k);
      ids.push_back({groups[g], key});
    }
  }
  return ids;
}

std::vector<std::size_t> synth_affected_features(const SynthConfig& config,
                                                 std::size_t state_index) {
  if (!config.signal) return {};
  const auto ids = synthetic_feature_ids(config.m_features);
  std::vector<std::size_t> pool;
  for (std::size_t j = 0; j < ids.size(); ++j)
    if (!config.signal->group || ids[j].group == *config.signal->group) pool.push_back(j);
  Rng rng(mix_seed(config.seed, 1000 + state_index));
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
  const auto take = static_cast<std::size_t>(
      std::ceil(config.signal->affected_fraction * static_cast<double>(pool.size())));
  pool.resize(std::min(take, pool.size()));
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<LocationDataset> synth_generate(const SynthConfig& config) {
  config.validate();
  const auto ids = synthetic_feature_ids(config.m_features);
  const auto dates =
      date_range(config.start, config.start + std::chrono::days{config.n_days - 1});
  const auto positives = static_cast<std::size_t>(
      std::llround(config.imbalance * static_cast<double>(config.n_days)));

  std::vector<LocationDataset> out;
  for (std::size_t s = 0; s < config.n_states; ++s) {
    Rng rng(mix_seed(config.seed, s));
    LocationDataset ds{states_by_attack_frequency()[s], dates,
                       Matrix(config.n_days, config.m_features), std::vector<int>(config.n_days, 0),
                       ids};
    for (auto& v : ds.X.data()) v = rng.normal();

    // Partial Fisher-Yates picks distinct positive days.
    std::vector<std::size_t> days(config.n_days);
    for (std::size_t i = 0; i < days.size(); ++i) days[i] = i;
    for (std::size_t i = 0; i < positives; ++i)
      std::swap(days[i], days[i + rng.below(days.size() - i)]);
    for (std::size_t i = 0; i < positives; ++i) ds.y[days[i]] = 1;

    if (config.signal) {
      std::vector<char> shifted(config.n_days, 0);
      for (std::size_t i = 0; i < config.n_days; ++i) {
        if (!ds.y[i]) continue;
        const std::size_t from = i >= config.signal->window_len ? i - config.signal->window_len : 0;
        for (std::size_t d = from; d < i; ++d) shifted[d] = 1;
      }
      for (auto j : synth_affected_features(config, s))
        for (std::size_t d = 0; d < config.n_days; ++d)
          if (shifted[d]) ds.X(d, j) += config.signal->shift_magnitude;
    }
    out.push_back(std::move(ds));
  }
  return out;
}

std::vector<IncidentRecord> synth_incidents(const std::vector<LocationDataset>& datasets,
                                            std::uint64_t seed) {
  static const std::vector<std::string> attacks{
      "Bombing/Explosion", "Armed Assault", "Facility/Infrastructure Attack", "Unarmed Assault",
      "Hostage Taking (Kidnapping)", "Assassination"};
  static const std::vector<std::string> weapons{"Explosives", "Firearms", "Incendiary", "Melee",
                                                "Unknown"};
  static const std::vector<std::string> targets{
      "Private Citizens & Property", "Religious Figures/Institutions", "Business",
      "Government (General)", "Police", "Educational Institution"};
  static const std::vector<std::string> groups{
      "Unknown", "Anti-Government extremists", "White extremists", "Jihadi-inspired extremists",
      "Anti-Abortion extremists"};
  Rng rng(mix_seed(seed, 77));
  std::vector<IncidentRecord> out;
  std::size_t next_id = 1;
  for (const auto& ds : datasets) {
    for (std::size_t i = 0; i < ds.n(); ++i) {
      if (!ds.y[i]) continue;
      IncidentRecord r;
      r.eventid = "SYN" + std::to_string(next_id++);
      r.state = ds.state;
      r.date = ds.dates[i];
      r.attack_type = attacks[rng.below(attacks.size())];
      r.weapon_type = weapons[rng.below(weapons.size())];
      r.target_type = targets[rng.below(targets.size())];
      r.group_name = groups[rng.below(groups.size())];
      r.success = rng.uniform() < 0.838;
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace eventcast::ingest
