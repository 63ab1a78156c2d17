#include "eventcast/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "eventcast/features.hpp"
#include "eventcast/stats.hpp"
#include "text.hpp"

namespace eventcast::experiments {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---------------------------------------------------------------- config

const std::map<std::string, std::string>& Config::schema() {
  static const std::map<std::string, std::string> keys = {
      {"seed", "master seed (the --seed flag wins)"},
      {"profile", "desk or paper (the --profile flag wins)"},
      {"threads", "worker threads; never changes results"},
      {"states", "comma-separated state codes"},
      {"data_dir", "directory of <STATE>.csv datasets; synthetic data when unset"},
      {"incidents", "incident CSV used by characteristics"},
      {"repeats", "cross-validation repeats (default 10)"},
      {"folds", "cross-validation folds (default 5)"},
      {"model", "default model for the analysis commands (default rf)"},
      {"window", "default window for the analysis commands (default dt*=14)"},
      {"synth.n_days", "synthetic days per state (800)"},
      {"synth.m_features", "synthetic features (40)"},
      {"synth.n_states", "synthetic states (5)"},
      {"synth.imbalance", "positive fraction (0.02)"},
      {"synth.signal", "planted or none (planted)"},
      {"synth.window_len", "days of elevated features before an event (7)"},
      {"synth.affected_fraction", "fraction of features carrying the signal (0.25)"},
      {"synth.shift", "mean shift in noise standard deviations (3)"},
      {"synth.group", "restrict the signal to one feature group"},
      {"synth.seed", "generator seed (defaults to the master seed)"},
      {"ingest.gkg", "comma-separated GKG files"},
      {"ingest.events", "comma-separated event files"},
      {"ingest.incidents", "incident CSV"},
      {"ingest.start", "first day (2015-02-18)"},
      {"ingest.end", "last day (2018-12-31)"},
      {"ingest.themes", "theme manifest override"},
      {"ingest.cameo", "CAMEO manifest override"},
      {"rf.estimators", "trees"},
      {"rf.subspace", "features per split (0 = ceil(sqrt(m)))"},
      {"ada.estimators", "boosting iterations"},
      {"smote.k", "SMOTE neighbours (5)"},
      {"smote.enabled", "oversample ensemble training sets (true)"},
      {"nn.hidden", "dense hidden width"},
      {"nn.feature_width", "per-feature width of the two-layer net (8)"},
      {"nn.epochs", "training epochs"},
      {"nn.lr", "learning rate (1e-4)"},
      {"nn.decay", "inverse-time decay (1e-6)"},
      {"nn.batch", "batch size (32)"},
      {"nn.momentum", "Nesterov momentum (0.9)"},
      {"lstm.hidden", "recurrent state size"},
      {"baseline.rows", "comma-separated model:window rows (default: the summary grid)"},
      {"sweep.models", "models swept (rf)"},
      {"sweep.kind", "dt, dt* or stack (dt)"},
      {"sweep.min", "first window (1)"},
      {"sweep.max", "last window (14)"},
      {"locality.run", "model:window for temporal-locality"},
      {"corr.run", "model:window for train-corr"},
      {"corr.exclude", "state left out of the second correlation (CA)"},
      {"ablate.run", "model:window for ablate"},
      {"characteristics.run", "model:window for characteristics"},
      {"pred.run", "model:window for pred-windows"},
      {"pred.min", "first prediction window (1)"},
      {"pred.max", "last prediction window (7)"},
      {"pred.modes", "propagation,aggregation"},
      {"transfer.run", "model:window for transfer"},
      {"group.run", "model:window for group-test"},
      {"group.states", "states tested (default: all loaded)"},
      {"group.min_threshold", "first event threshold (6)"},
      {"group.max_threshold", "last event threshold (16)"},
      {"group.threshold", "positives a pooled group must exceed (6)"},
      {"coarse.basis", "counts (reference attack counts) or incidents"},
      {"coarse.incidents", "incident CSV for the incidents basis"},
      {"coarse.states", "states scored 1 (CA,NY,TX,FL,WA)"},
      {"coarse.counts", "override counts, e.g. CA:24,NY:24"},
  };
  return keys;
}

Config Config::parse(std::string_view content) {
  Config c;
  std::size_t line_no = 0;
  for (auto raw : text::lines(content)) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    c.set(std::string(text::trim(line.substr(0, eq))), std::string(text::trim(line.substr(eq + 1))));
  }
  return c;
}

Config Config::load(const fs::path& path) { return parse(text::read_file(path.string())); }

void Config::set(const std::string& key, const std::string& value) {
  if (!schema().count(key)) throw std::invalid_argument("unknown config key: " + key);
  values_[key] = value;
}

std::optional<std::string> Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::get_or(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  auto i = text::to_int(*v);
  if (!i || *i < 0) throw std::invalid_argument("config " + key + ": expected a non-negative integer");
  return static_cast<std::size_t>(*i);
}

double Config::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  auto d = text::to_double(*v);
  if (!d) throw std::invalid_argument("config " + key + ": expected a number");
  return *d;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw std::invalid_argument("config " + key + ": expected true or false");
}

std::vector<std::string> Config::get_list(const std::string& key,
                                          const std::vector<std::string>& fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::vector<std::string> out;
  for (auto part : text::split(*v, ',')) {
    auto t = text::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    if (k == "threads") continue;
    out += k + "=" + v + "\n";
  }
  return out;
}

// ---------------------------------------------------------------- references

const std::vector<std::pair<std::string, std::size_t>>& reference_attack_counts() {
  static const std::vector<std::pair<std::string, std::size_t>> counts = [] {
    std::vector<std::pair<std::string, std::size_t>> v;
    auto add = [&](std::initializer_list<const char*> states, std::size_t c) {
      for (const char* s : states) v.emplace_back(s, c);
    };
    add({"CA", "NY"}, 24);
    add({"TX"}, 18);
    add({"FL"}, 17);
    add({"WA"}, 14);
    add({"LA", "MO"}, 7);
    add({"NV", "PA"}, 6);
    add({"IN", "NC", "TN", "VA"}, 5);
    add({"CO", "IA", "MS", "NM"}, 4);
    add({"GA", "IL", "KY", "MA", "MN", "ND", "OH", "OR"}, 3);
    add({"AZ", "DC", "MD", "MI", "NE", "NJ", "SC", "UT", "WI"}, 2);
    add({"CT", "DE", "ID", "KS", "MT", "WY"}, 1);
    add({"AK", "AL", "AR", "HI", "ME", "NH", "OK", "RI", "SD", "VT", "WV"}, 0);
    return v;
  }();
  return counts;
}

const std::vector<std::string>& baseline_grid() {
  static const std::vector<std::string> grid = {
      "random:dt=1",    "rf:dt=1",          "rf:dt=14",         "rf:dt*=14",
      "ada:dt=1",       "ada:dt=14",        "ada:dt*=14",       "ffnn1:stack=1",
      "ffnn1:stack=7",  "ffnn2:stack=7",    "ffnn1:dt*=7",      "lstm:stack=7"};
  return grid;
}

namespace {

const std::vector<std::string> kGridStates = {"NY", "CA", "TX", "FL", "WA"};

const std::map<std::string, std::vector<std::string>>& reference_grid() {
  static const std::map<std::string, std::vector<std::string>> g = {
      {"random|dt=1", {".500 ± .000", ".500 ± .000", ".500 ± .000", ".500 ± .000", ".500 ± .000"}},
      {"rf|dt=1", {".604 ± .118", ".504 ± .065", ".721 ± .184", ".591 ± .140", ".500 ± .248"}},
      {"rf|dt=14", {".631 ± .093", ".390 ± .133", ".530 ± .166", ".623 ± .120", ".591 ± .261"}},
      {"rf|dt*=14", {".685 ± .057", ".466 ± .060", ".682 ± .196", ".685 ± .101", ".667 ± .214"}},
      {"ada|dt=1", {".623 ± .079", ".436 ± .110", ".574 ± .117", ".459 ± .093", ".376 ± .122"}},
      {"ada|dt=14", {".500 ± .243", ".360 ± .189", ".401 ± .136", ".421 ± .126", ".538 ± .253"}},
      {"ada|dt*=14", {".668 ± .073", ".463 ± .135", ".589 ± .136", ".472 ± .123", ".544 ± .171"}},
      {"ffnn1|stack=1", {".393 ± .065", ".584 ± .100", ".454 ± .199", ".420 ± .099", ".409 ± .149"}},
      {"ffnn1|stack=7", {".414 ± .110", ".672 ± .095", ".650 ± .118", ".667 ± .098", ".615 ± .252"}},
      {"ffnn2|stack=7", {".428 ± .095", ".680 ± .073", ".528 ± .127", ".362 ± .144", ".648 ± .201"}},
      {"ffnn1|dt*=7", {".479 ± .219", ".568 ± .077", ".591 ± .175", ".552 ± .039", ".546 ± .229"}},
      {"lstm|stack=7", {".374 ± .078", ".582 ± .153", ".725 ± .212", ".696 ± .168", ".563 ± .270"}},
  };
  return g;
}

}  // namespace

std::optional<std::string> reference_cell(const std::string& model, const std::string& window,
                                          const std::string& state) {
  auto it = reference_grid().find(model + "|" + window);
  if (it == reference_grid().end()) return std::nullopt;
  for (std::size_t i = 0; i < kGridStates.size(); ++i)
    if (kGridStates[i] == state) return it->second[i];
  return std::nullopt;
}

std::string reference_manifest_json() {
  ordered_json j;
  j["note"] = "reference values from the real corpus; printed for comparison, never asserted";
  ordered_json counts = ordered_json::object();
  for (const auto& [s, c] : reference_attack_counts()) counts[s] = c;
  j["attack_counts"] = counts;
  j["days"] = kReferenceDays;
  j["period"] = "2015-02-18..2018-12-31";
  j["incidents_total"] = 229;
  j["unique_state_days"] = 208;
  ordered_json grid = ordered_json::object();
  for (const auto& row : baseline_grid()) {
    const auto colon = row.find(':');
    const auto key = row.substr(0, colon) + "|" + row.substr(colon + 1);
    ordered_json cells = ordered_json::object();
    for (std::size_t i = 0; i < kGridStates.size(); ++i)
      cells[kGridStates[i]] = reference_grid().at(key)[i];
    grid[row] = cells;
  }
  j["summary_grid"] = grid;
  j["coarse_demo"] = {{"auroc", 0.733}, {"auprc", 0.468}, {"baseline_auroc", 0.5},
                      {"baseline_auprc", 0.003}};
  j["transfer_NY_plus_CA"] = -0.232;
  j["train_corr_r_s"] = {{"all_states", -0.241}, {"without_CA", 0.136}};
  j["characteristics_p"] = "> 0.1";
  j["group_event_thresholds"] = "6..16";
  j["nearest_state_of_LA"] = "MO";
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------- coarse demo

std::vector<int> labels_from_count(std::size_t count, std::size_t days) {
  if (count > days) throw std::invalid_argument("labels_from_count: more attack days than days");
  std::vector<int> y(days, 0);
  for (std::size_t i = 0; i < count; ++i) y[(2 * i + 1) * days / (2 * count)] = 1;
  return y;
}

CoarseDemo coarse_demo(const std::map<std::string, std::size_t>& positives_by_state,
                       std::size_t days, const std::vector<std::string>& flagged) {
  CoarseDemo demo;
  demo.days = days;
  demo.flagged = flagged;
  std::vector<double> scores, constant;
  std::vector<int> labels;
  for (const auto& state : ingest::state_codes()) {
    auto it = positives_by_state.find(state);
    const std::size_t count = it == positives_by_state.end() ? 0 : it->second;
    const bool hot = std::find(flagged.begin(), flagged.end(), state) != flagged.end();
    const auto y = labels_from_count(count, days);
    for (int v : y) {
      labels.push_back(v);
      scores.push_back(hot ? 1.0 : 0.0);
      constant.push_back(0.5);
    }
    ++demo.states;
    demo.positives += count;
    if (hot) {
      demo.flagged_instances += days;
      demo.flagged_positives += count;
    }
  }
  for (const auto& [state, c] : positives_by_state)
    if (!ingest::is_state_code(state)) throw std::invalid_argument("coarse demo: unknown state " + state);
  demo.instances = labels.size();
  demo.prevalence = static_cast<double>(demo.positives) / static_cast<double>(demo.instances);
  demo.auroc = stats::auroc(scores, labels).value();
  demo.auprc = stats::auprc(scores, labels).value();
  demo.baseline_auroc = stats::auroc(constant, labels).value();
  demo.baseline_auprc = stats::auprc(constant, labels).value();
  return demo;
}

// ---------------------------------------------------------------- inputs

ingest::SynthConfig synth_config(const RunContext& ctx) {
  const auto& c = ctx.config;
  ingest::SynthConfig s;
  s.n_days = c.get_size("synth.n_days", 800);
  s.m_features = c.get_size("synth.m_features", 40);
  s.n_states = c.get_size("synth.n_states", c.has("states") ? c.get_list("states", {}).size() : 5);
  s.imbalance = c.get_double("synth.imbalance", 0.02);
  s.seed = c.has("synth.seed") ? c.get_size("synth.seed", 0) : ctx.seed;
  const auto signal = c.get_or("synth.signal", "planted");
  if (signal == "planted") {
    ingest::PlantedSignal p;
    p.window_len = c.get_size("synth.window_len", 7);
    p.affected_fraction = c.get_double("synth.affected_fraction", 0.25);
    p.shift_magnitude = c.get_double("synth.shift", 3.0);
    if (auto g = c.get("synth.group")) p.group = ingest::parse_group(*g);
    s.signal = p;
  } else if (signal != "none") {
    throw std::invalid_argument("synth.signal must be planted or none");
  }
  s.validate();
  return s;
}

namespace {

std::vector<std::string> resolve_states(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& s : raw) {
    auto code = ingest::resolve_state(s);
    if (!code) throw std::invalid_argument("unknown state: " + s);
    out.push_back(*code);
  }
  return out;
}

}  // namespace

std::vector<ingest::LocationDataset> load_datasets(const RunContext& ctx) {
  const auto& c = ctx.config;
  if (auto dir = c.get("data_dir")) {
    auto states = resolve_states(c.get_list("states", {}));
    if (states.empty()) {
      for (const auto& e : fs::directory_iterator(*dir))
        if (e.path().extension() == ".csv" && ingest::is_state_code(e.path().stem().string()))
          states.push_back(e.path().stem().string());
      std::sort(states.begin(), states.end());
    }
    std::vector<ingest::LocationDataset> out;
    for (const auto& s : states) {
      const fs::path p = fs::path(*dir) / (s + ".csv");
      if (!fs::exists(p)) {
        if (ctx.log) *ctx.log << "notice: no dataset for " << s << " (" << p.string() << "), skipped\n";
        continue;
      }
      out.push_back(ingest::read_dataset(p, s));
    }
    if (out.empty()) throw std::runtime_error("no datasets found in " + *dir);
    return out;
  }
  auto all = ingest::synth_generate(synth_config(ctx));
  auto wanted = resolve_states(c.get_list("states", {}));
  if (wanted.empty()) return all;
  std::vector<ingest::LocationDataset> out;
  for (const auto& w : wanted) {
    auto it = std::find_if(all.begin(), all.end(), [&](const auto& d) { return d.state == w; });
    if (it == all.end()) {
      if (ctx.log) *ctx.log << "notice: synthetic data has no state " << w << ", skipped\n";
      continue;
    }
    out.push_back(*it);
  }
  if (out.empty()) throw std::runtime_error("none of the requested states are available");
  return out;
}

eval::ModelSpec model_from_config(const std::string& name, const RunContext& ctx) {
  auto spec = eval::default_model(name, ctx.profile);
  const auto& c = ctx.config;
  if (spec.kind == eval::ModelKind::RandomForest) {
    spec.estimators = c.get_size("rf.estimators", spec.estimators);
    spec.subspace = c.get_size("rf.subspace", spec.subspace);
  }
  if (spec.kind == eval::ModelKind::AdaBoost) spec.estimators = c.get_size("ada.estimators", spec.estimators);
  if (spec.is_ensemble()) {
    spec.smote_k = c.get_size("smote.k", spec.smote_k);
    spec.smote = c.get_bool("smote.enabled", spec.smote);
  }
  if (spec.is_neural()) {
    spec.hidden = spec.kind == eval::ModelKind::Recurrent ? c.get_size("lstm.hidden", spec.hidden)
                                                          : c.get_size("nn.hidden", spec.hidden);
    spec.feature_width = c.get_size("nn.feature_width", spec.feature_width);
    spec.optimizer.epochs = c.get_size("nn.epochs", spec.optimizer.epochs);
    spec.optimizer.learning_rate = c.get_double("nn.lr", spec.optimizer.learning_rate);
    spec.optimizer.decay = c.get_double("nn.decay", spec.optimizer.decay);
    spec.optimizer.batch_size = c.get_size("nn.batch", spec.optimizer.batch_size);
    spec.optimizer.momentum = c.get_double("nn.momentum", spec.optimizer.momentum);
  }
  return spec;
}

std::pair<eval::ModelSpec, features::WindowSpec> parse_run_spec(const std::string& spec,
                                                                 const RunContext& ctx) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("run spec must look like model:window, got " + spec);
  return {model_from_config(spec.substr(0, colon), ctx),
          features::WindowSpec::parse(spec.substr(colon + 1))};
}

std::string command_fingerprint(const std::string& command, const RunContext& ctx) {
  const std::string s = "command=" + command + "\nseed=" + std::to_string(ctx.seed) +
                        "\nprofile=" + eval::profile_name(ctx.profile) + "\n" +
                        ctx.config.canonical();
  return hex64(fingerprint(s));
}

namespace {

// ---------------------------------------------------------------- helpers

struct Writer {
  const RunContext& ctx;
  std::string command;
  std::string fp;
  CommandResult result;

  Writer(const RunContext& c, std::string name)
      : ctx(c), command(std::move(name)), fp(command_fingerprint(command, c)) {
    result.command = command;
    result.fingerprint = fp;
    fs::create_directories(ctx.out);
  }

  ordered_json header() const {
    ordered_json j;
    j["command"] = command;
    j["fingerprint"] = fp;
    j["seed"] = ctx.seed;
    j["profile"] = eval::profile_name(ctx.profile);
    ordered_json cfg = ordered_json::object();
    for (const auto& [k, v] : ctx.config.values())
      if (k != "threads") cfg[k] = v;
    j["config"] = cfg;
    return j;
  }

  void json(const std::string& name, const ordered_json& j) { raw(name, j.dump(2) + "\n"); }

  void csv(const std::string& name, const std::string& header_line, const std::string& rows) {
    raw(name, "# eventcast " + command + " fingerprint=" + fp + "\n" + header_line + "\n" + rows);
  }

  void raw(const std::string& name, const std::string& content) {
    const fs::path p = ctx.out / name;
    fs::create_directories(p.parent_path());
    text::write_file(p.string(), content);
    result.files.push_back(p);
  }

  void note(const std::string& s) const {
    if (ctx.log) *ctx.log << s << '\n';
  }
};

std::string fmt(double v) { return text::shortest(v); }

std::string fmt(const std::optional<double>& v) { return v ? text::shortest(*v) : ""; }

ordered_json opt(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::string window_tag(const features::WindowSpec& w) {
  switch (w.kind) {
    case features::WindowKind::Fixed: return "dt" + std::to_string(w.length);
    case features::WindowKind::KS: return "ks" + std::to_string(w.length);
    case features::WindowKind::Stacked: return "stack" + std::to_string(w.length);
  }
  return "w";
}

eval::CvOptions cv_options(const RunContext& ctx) {
  eval::CvOptions o;
  o.k = ctx.config.get_size("folds", 5);
  o.repeats = ctx.config.get_size("repeats", 10);
  o.seed = ctx.seed;
  o.threads = ctx.threads;
  return o;
}

std::pair<eval::ModelSpec, features::WindowSpec> analysis_run(const RunContext& ctx,
                                                              const std::string& key) {
  if (auto v = ctx.config.get(key)) return parse_run_spec(*v, ctx);
  const auto model = ctx.config.get_or("model", "rf");
  const auto window = ctx.config.get_or("window", "dt*=14");
  return parse_run_spec(model + ":" + window, ctx);
}

ordered_json run_summary(const eval::EvalReport& r) {
  ordered_json j;
  j["state"] = r.state;
  j["model"] = r.model;
  j["window"] = r.window;
  j["run_fingerprint"] = r.fingerprint;
  j["n"] = r.n;
  j["m"] = r.m;
  j["auroc_mean"] = r.mean;
  j["auroc_std_folds"] = r.std_folds;
  j["auroc_std_repeats"] = r.std_repeats;
  j["auroc_std_all"] = r.std_all;
  j["auprc_mean"] = opt(r.mean_auprc);
  j["excluded_folds"] = r.excluded;
  j["audit_clean"] = r.audit.clean();
  return j;
}

ordered_json conventions() {
  ordered_json j;
  j["auroc"] = "mann_whitney(ties count 1/2)";
  j["auprc"] = stats::kAuprcConvention;
  j["std"] = "population (divide by count)";
  j["purge"] = "start-dt-horizon <= d <= end+dt";
  j["folds"] = "contiguous, remainder to earliest folds";
  return j;
}

std::optional<eval::EvalReport> try_cv(Writer& w, const ingest::LocationDataset& ds,
                                       const features::WindowSpec& window,
                                       const eval::ModelSpec& model, const eval::CvOptions& o,
                                       std::string* why = nullptr) {
  try {
    return eval::run_cv(ds, window, model, o);
  } catch (const std::exception& e) {
    w.note("notice: " + ds.state + " " + model.name() + " " + window.label() + " skipped: " + e.what());
    if (why) *why = e.what();
    return std::nullopt;
  }
}

// ---------------------------------------------------------------- commands

CommandResult cmd_ingest(const RunContext& ctx) {
  Writer w(ctx, "ingest");
  const auto& c = ctx.config;
  const Date start = parse_date(c.get_or("ingest.start", "2015-02-18"));
  const Date end = parse_date(c.get_or("ingest.end", "2018-12-31"));
  if (end < start) throw std::invalid_argument("ingest.end precedes ingest.start");
  const auto dates = date_range(start, end);
  const auto registry = c.has("ingest.themes") || c.has("ingest.cameo")
                            ? ingest::FeatureRegistry::load(
                                  c.get_or("ingest.themes", std::string(EVENTCAST_DATA_DIR) + "/gkg_themes_v1.txt"),
                                  c.get_or("ingest.cameo", std::string(EVENTCAST_DATA_DIR) + "/cameo_base_codes_v1.txt"))
                            : ingest::FeatureRegistry::canonical();

  std::vector<ingest::NewsRecord> records;
  ordered_json files = ordered_json::array();
  auto parse_all = [&](const std::string& key, ingest::NewsFormat fmt_) {
    for (const auto& path : c.get_list(key, {})) {
      auto res = ingest::parse_news_file(path, fmt_);
      files.push_back({{"path", path},
                       {"format", fmt_ == ingest::NewsFormat::Gkg ? "gkg" : "events"},
                       {"rows", res.stats.rows},
                       {"records", res.records.size()},
                       {"malformed", res.stats.malformed},
                       {"unresolved_state", res.stats.unresolved_state}});
      records.insert(records.end(), res.records.begin(), res.records.end());
    }
  };
  parse_all("ingest.gkg", ingest::NewsFormat::Gkg);
  parse_all("ingest.events", ingest::NewsFormat::Events);

  std::vector<ingest::IncidentRecord> incidents;
  if (auto p = c.get("ingest.incidents")) {
    auto res = ingest::parse_incidents(*p);
    files.push_back({{"path", *p},
                     {"format", "incidents"},
                     {"rows", res.stats.rows},
                     {"records", res.records.size()},
                     {"malformed", res.stats.malformed},
                     {"unresolved_state", res.stats.unresolved_state}});
    incidents = std::move(res.records);
  }

  auto states = resolve_states(c.get_list("states", {}));
  if (states.empty()) {
    std::set<std::string> seen;
    for (const auto& r : records) seen.insert(r.state);
    for (const auto& i : incidents) seen.insert(i.state);
    states.assign(seen.begin(), seen.end());
  }

  ordered_json j = w.header();
  j["files"] = files;
  j["days"] = dates.size();
  j["first_day"] = format_date(start);
  j["last_day"] = format_date(end);
  j["unique_incident_days"] = ingest::unique_incident_days(incidents, start, end);
  ordered_json summary = ordered_json::array();
  std::ostringstream text_summary;
  text_summary << "state      n    m  positives  imbalance\n";
  for (const auto& s : states) {
    ingest::LocationDataset ds{s, dates, ingest::build_daily_features(records, s, dates, registry),
                               ingest::label_vector(incidents, s, dates), registry.feature_ids()};
    ds.validate();
    w.raw("datasets/" + s + ".csv",
          ingest::dataset_to_csv(ds, "eventcast ingest fingerprint=" + w.fp));
    summary.push_back({{"state", s}, {"n", ds.n()}, {"m", ds.m()}, {"positives", ds.positives()},
                       {"imbalance", ds.imbalance()}});
    char line[96];
    std::snprintf(line, sizeof line, "%-5s %6zu %4zu %10zu %10.4f\n", s.c_str(), ds.n(), ds.m(),
                  ds.positives(), ds.imbalance());
    text_summary << line;
  }
  j["datasets"] = summary;
  w.json("ingest.json", j);
  w.result.summary = text_summary.str();
  return w.result;
}

CommandResult cmd_synth(const RunContext& ctx) {
  Writer w(ctx, "synth");
  const auto cfg = synth_config(ctx);
  const auto datasets = load_datasets(ctx);
  ordered_json j = w.header();
  j["synth"] = cfg.describe();
  ordered_json summary = ordered_json::array();
  std::ostringstream text_summary;
  text_summary << "state      n    m  positives  imbalance\n";
  for (std::size_t s = 0; s < datasets.size(); ++s) {
    const auto& ds = datasets[s];
    w.raw("datasets/" + ds.state + ".csv",
          ingest::dataset_to_csv(ds, "eventcast synth fingerprint=" + w.fp));
    ordered_json row = {{"state", ds.state}, {"n", ds.n()}, {"m", ds.m()},
                        {"positives", ds.positives()}, {"imbalance", ds.imbalance()}};
    if (cfg.signal) {
      // Affected columns follow the state's position in the generator order.
      const auto& order = ingest::states_by_attack_frequency();
      const auto idx = static_cast<std::size_t>(
          std::find(order.begin(), order.end(), ds.state) - order.begin());
      ordered_json cols = ordered_json::array();
      for (auto col : ingest::synth_affected_features(cfg, idx)) cols.push_back(ds.features[col].name());
      row["signal_features"] = cols;
    }
    summary.push_back(row);
    char line[96];
    std::snprintf(line, sizeof line, "%-5s %6zu %4zu %10zu %10.4f\n", ds.state.c_str(), ds.n(),
                  ds.m(), ds.positives(), ds.imbalance());
    text_summary << line;
  }
  const auto incidents = ingest::synth_incidents(datasets, mix_seed(cfg.seed, 77));
  const fs::path inc = ctx.out / "incidents.csv";
  fs::create_directories(ctx.out);
  ingest::write_incidents(inc, incidents, "eventcast synth fingerprint=" + w.fp);
  w.result.files.push_back(inc);
  j["datasets"] = summary;
  j["incidents"] = incidents.size();
  w.json("synth.json", j);
  w.result.summary = text_summary.str();
  return w.result;
}

CommandResult cmd_baseline(const RunContext& ctx) {
  Writer w(ctx, "baseline");
  const auto datasets = load_datasets(ctx);
  const auto rows = ctx.config.get_list("baseline.rows", baseline_grid());
  const auto o = cv_options(ctx);
  ordered_json j = w.header();
  j["conventions"] = conventions();
  ordered_json table = ordered_json::array();
  std::string csv;
  std::ostringstream text_summary;
  text_summary << "model:window            state   auroc mean  std(folds)  reference\n";
  for (const auto& row : rows) {
    const auto [model, window] = parse_run_spec(row, ctx);
    for (const auto& ds : datasets) {
      std::string why;
      auto rep = try_cv(w, ds, window, model, o, &why);
      const auto ref = reference_cell(model.name(), window.label(), ds.state);
      ordered_json cell;
      if (rep) {
        cell = run_summary(*rep);
        w.raw("baseline/" + ds.state + "_" + model.name() + "_" + window_tag(window) + ".json",
              eval::report_json(*rep));
        w.raw("baseline/" + ds.state + "_" + model.name() + "_" + window_tag(window) +
                  "_predictions.csv",
              eval::predictions_csv(*rep));
        csv += ds.state + "," + model.name() + "," + window.label() + "," + fmt(rep->mean) + "," +
               fmt(rep->std_folds) + "," + fmt(rep->std_repeats) + "," + fmt(rep->mean_auprc) +
               "," + std::to_string(rep->excluded) + "," + text::csv_escape(ref.value_or("")) + "\n";
      } else {
        cell = {{"state", ds.state}, {"model", model.name()}, {"window", window.label()},
                {"skipped", why}};
        csv += ds.state + "," + model.name() + "," + window.label() + ",,,,,," +
               text::csv_escape(ref.value_or("")) + "\n";
      }
      cell["reference"] = ref ? ordered_json(*ref) : ordered_json(nullptr);
      table.push_back(cell);
      char line[160];
      std::snprintf(line, sizeof line, "%-22s %-5s %10s %11s  %s\n", row.c_str(), ds.state.c_str(),
                    rep ? fmt(std::round(rep->mean * 1000) / 1000).c_str() : "-",
                    rep ? fmt(std::round(rep->std_folds * 1000) / 1000).c_str() : "-",
                    ref.value_or("").c_str());
      text_summary << line;
    }
  }
  j["rows"] = table;
  w.json("baseline.json", j);
  w.csv("baseline.csv",
        "state,model,window,auroc_mean,auroc_std_folds,auroc_std_repeats,auprc_mean,excluded_folds,reference",
        csv);
  w.result.summary = text_summary.str();
  return w.result;
}

CommandResult cmd_sweep(const RunContext& ctx) {
  Writer w(ctx, "sweep-windows");
  const auto datasets = load_datasets(ctx);
  const auto models = ctx.config.get_list("sweep.models", {"rf"});
  const auto kind = ctx.config.get_or("sweep.kind", "dt");
  const auto lo = ctx.config.get_size("sweep.min", 1), hi = ctx.config.get_size("sweep.max", 14);
  if (lo < 1 || hi < lo) throw std::invalid_argument("sweep range must satisfy 1 <= min <= max");
  const auto o = cv_options(ctx);
  ordered_json j = w.header();
  j["conventions"] = conventions();
  ordered_json curves = ordered_json::array();
  std::string csv;
  std::ostringstream text_summary;
  for (const auto& name : models) {
    const auto model = model_from_config(name, ctx);
    for (const auto& ds : datasets) {
      ordered_json points = ordered_json::array();
      std::optional<std::size_t> best;
      double best_v = -1;
      for (std::size_t dt = lo; dt <= hi; ++dt) {
        const auto window = features::WindowSpec::parse(kind + "=" + std::to_string(dt));
        auto rep = try_cv(w, ds, window, model, o);
        csv += ds.state + "," + name + "," + window.label() + "," + std::to_string(dt) + "," +
               (rep ? fmt(rep->mean) + "," + fmt(rep->std_folds) + "," + fmt(rep->std_repeats)
                    : std::string(",,")) +
               "\n";
        points.push_back({{"dt", dt},
                          {"auroc_mean", rep ? ordered_json(rep->mean) : ordered_json(nullptr)},
                          {"auroc_std_folds", rep ? ordered_json(rep->std_folds) : ordered_json(nullptr)}});
        if (rep && rep->mean > best_v) {
          best_v = rep->mean;
          best = dt;
        }
      }
      curves.push_back({{"state", ds.state}, {"model", name}, {"kind", kind}, {"points", points},
                        {"best_dt", best ? ordered_json(*best) : ordered_json(nullptr)}});
      text_summary << ds.state << " " << name << ": best " << kind << "="
                   << (best ? std::to_string(*best) : "-") << " (AUROC " << fmt(std::round(best_v * 1000) / 1000) << ")\n";
    }
  }
  j["curves"] = curves;
  w.json("sweep-windows.json", j);
  w.csv("sweep-windows.csv", "state,model,window,dt,auroc_mean,auroc_std_folds,auroc_std_repeats", csv);
  w.result.summary = text_summary.str();
  return w.result;
}

CommandResult cmd_locality(const RunContext& ctx) {
  Writer w(ctx, "temporal-locality");
  const auto datasets = load_datasets(ctx);
  const auto [model, window] = analysis_run(ctx, "locality.run");
  const auto o = cv_options(ctx);
  ordered_json j = w.header();
  j["model"] = model.describe();
  j["window"] = window.label();
  ordered_json per_state = ordered_json::array();
  std::vector<double> all_gap, all_p;
  std::string csv;
  std::ostringstream text_summary;
  for (const auto& ds : datasets) {
    auto rep = try_cv(w, ds, window, model, o);
    if (!rep) continue;
    std::vector<Date> events;
    for (std::size_t i = 0; i < ds.n(); ++i)
      if (ds.y[i]) events.push_back(ds.dates[i]);
    std::vector<double> gap, prob;
    for (const auto& p : eval::average_predictions(*rep)) {
      if (!p.y) continue;
      auto it = std::lower_bound(events.begin(), events.end(), p.date);
      if (it == events.begin()) continue;  // first event: no previous attack
      const auto days = (p.date - *std::prev(it)).count();
      gap.push_back(static_cast<double>(days));
      prob.push_back(p.p);
      csv += ds.state + "," + format_date(p.date) + "," + std::to_string(days) + "," + fmt(p.p) + "\n";
    }
    std::optional<double> rs;
    if (gap.size() >= 2) rs = stats::spearman(gap, prob);
    per_state.push_back({{"state", ds.state}, {"events", gap.size()}, {"r_s", opt(rs)}});
    all_gap.insert(all_gap.end(), gap.begin(), gap.end());
    all_p.insert(all_p.end(), prob.begin(), prob.end());
    text_summary << ds.state << ": " << gap.size() << " events, r_s = " << (rs ? fmt(*rs) : "undefined") << "\n";
  }
  std::optional<double> pooled;
  if (all_gap.size() >= 2) pooled = stats::spearman(all_gap, all_p);
  j["states"] = per_state;
  j["pooled"] = {{"events", all_gap.size()}, {"r_s", opt(pooled)}};
  w.json("temporal-locality.json", j);
  w.csv("temporal-locality.csv", "state,date,days_since_previous,p", csv);
  text_summary << "pooled r_s = " << (pooled ? fmt(*pooled) : "undefined") << "\n";
  w.result.summary = text_summary.str();
  return w.result;
}

CommandResult cmd_train_corr(const RunContext& ctx) {
  Writer w(ctx, "train-corr");
  const auto datasets = load_datasets(ctx);
  const auto [model, window] = analysis_run(ctx, "corr.run");
  const auto exclude = ingest::resolve_state(ctx.config.get_or("corr.exclude", "CA")).value_or("");
  const auto o = cv_options(ctx);
  ordered_json j = w.header();
  j["model"] = model.describe();
  j["window"] = window.label();
  std::string csv;
  std::vector<double> pos_all, auc_all, pos_ex, auc_ex;
  std::size_t folds = 0;
  for (const auto& ds : datasets) {
    auto rep = try_cv(w, ds, window, model, o);
    if (!rep) continue;
    for (const auto& f : rep->folds) {
      ++folds;
      csv += ds.state + "," + std::to_string(f.repeat) + "," + std::to_string(f.fold) + "," +
             std::to_string(f.train_positives) + "," + fmt(f.auroc) + "," +
             (f.excluded ? "1" : "0") + "\n";
      if (f.excluded || !f.auroc) continue;
      pos_all.push_back(static_cast<double>(f.train_positives));
      auc_all.push_back(*f.auroc);
      if (ds.state != exclude) {
        pos_ex.push_back(static_cast<double>(f.train_positives));
        auc_ex.push_back(*f.auroc);
      }
    }
  }
  auto rs = [](const std::vector<double>& a, const std::vector<double>& b) -> std::optional<double> {
    if (a.size() < 2) return std::nullopt;
    return stats::spearman(a, b);
  };
  const auto r_all = rs(pos_all, auc_all), r_ex = rs(pos_ex, auc_ex);
  j["folds"] = folds;
  j["included_folds"] = pos_all.size();
  j["r_s"] = opt(r_all);
  j["excluded_state"] = exclude;
  j["r_s_without_excluded_state"] = opt(r_ex);
  w.json("train-corr.json", j);
  w.csv("train-corr.csv", "state,repeat,fold,train_positives,auroc,excluded", csv);
  w.result.summary = "r_s = " + (r_all ? fmt(*r_all) : std::string("undefined")) + " over " +
                     std::to_string(pos_all.size()) + " folds; without " + exclude + ": " +
                     (r_ex ? fmt(*r_ex) : std::string("undefined")) + "\n";
  return w.result;
}

CommandResult cmd_ablate(const RunContext& ctx) {
  Writer w(ctx, "ablate");
  const auto datasets = load_datasets(ctx);
  const auto [model, window] = analysis_run(ctx, "ablate.run");
  const auto o = cv_options(ctx);
  ordered_json j = w.header();
  j["model"] = model.describe();
  j["window"] = window.label();
  ordered_json rows = ordered_json::array();
  std::string csv;
  std::ostringstream text_summary;
  const std::vector<std::optional<ingest::FeatureGroup>> drops = {
      std::nullopt, ingest::FeatureGroup::ThemeCount, ingest::FeatureGroup::ThemeSentiment,
      ingest::FeatureGroup::CameoCount, ingest::FeatureGroup::CameoSentiment};
  for (const auto& ds : datasets) {
    text_summary << ds.state << ":";
    for (const auto& drop : drops) {
      std::vector<std::size_t> keep;
      for (std::size_t c = 0; c < ds.m(); ++c)
        if (!drop || ds.features[c].group != *drop) keep.push_back(c);
      const std::string label = drop ? std::string(ingest::group_name(*drop)) : "none";
      std::optional<eval::EvalReport> rep;
      if (!keep.empty()) rep = try_cv(w, ds.with_features(keep), window, model, o);
      rows.push_back({{"state", ds.state}, {"dropped", label}, {"m", keep.size()},
                      {"auroc_mean", rep ? ordered_json(rep->mean) : ordered_json(nullptr)},
                      {"auroc_std_folds", rep ? ordered_json(rep->std_folds) : ordered_json(nullptr)},
                      {"run_fingerprint", rep ? ordered_json(rep->fingerprint) : ordered_json(nullptr)}});
      csv += ds.state + "," + label + "," + std::to_string(keep.size()) + "," +
             (rep ? fmt(rep->mean) + "," + fmt(rep->std_folds) : std::string(",")) + "\n";
      text_summary << " -" << label << "=" << (rep ? fmt(std::round(rep->mean * 1000) / 1000) : "-");
    }
    text_summary << "\n";
  }
  j["rows"] = rows;
  w.json("ablate.json", j);
  w.csv("ablate.csv", "state,dropped,m,auroc_mean,auroc_std_folds", csv);
  w.result.summary = text_summary.str();
  return w.result;
}

CommandResult cmd_characteristics(const RunContext& ctx) {
  Writer w(ctx, "characteristics");
  const auto datasets = load_datasets(ctx);
  const auto [model, window] = analysis_run(ctx, "characteristics.run");
  const auto o = cv_options(ctx);
  std::vector<ingest::IncidentRecord> incidents;
  if (auto p = ctx.config.get("incidents")) {
    incidents = ingest::parse_incidents(*p).records;
  } else if (!ctx.config.has("data_dir")) {
    incidents = ingest::synth_incidents(datasets, mix_seed(synth_config(ctx).seed, 77));
  } else {
    throw std::invalid_argument("characteristics needs an incidents file (config key incidents)");
  }
  std::map<std::pair<std::string, Date>, double> prob;
  for (const auto& ds : datasets) {
    auto rep = try_cv(w, ds, window, model, o);
    if (!rep) continue;
    for (const auto& p : eval::average_predictions(*rep))
      if (p.y) prob[{p.state, p.date}] = p.p;
  }
  struct Dim {
    const char* name;
    std::string ingest::IncidentRecord::*field;
  };
  const Dim dims[] = {{"attack_type", &ingest::IncidentRecord::attack_type},
                      {"weapon_type", &ingest::IncidentRecord::weapon_type},
                      {"target_type", &ingest::IncidentRecord::target_type},
                      {"group_name", &ingest::IncidentRecord::group_name}};
  ordered_json j = w.header();
  j["model"] = model.describe();
  j["window"] = window.label();
  j["reference_p"] = "> 0.1";
  ordered_json out = ordered_json::array();
  std::string csv;
  std::ostringstream text_summary;
  std::size_t matched = 0;
  for (const auto& inc : incidents) matched += prob.count({inc.state, inc.date});
  for (const auto& d : dims) {
    std::map<std::string, std::vector<double>> groups;
    for (const auto& inc : incidents) {
      auto it = prob.find({inc.state, inc.date});
      if (it == prob.end()) continue;
      const std::string cat = (inc.*d.field).empty() ? "Unknown" : inc.*d.field;
      groups[cat].push_back(it->second);
    }
    std::map<std::string, std::vector<double>> pooled;
    for (auto& [cat, v] : groups) {
      auto& dst = v.size() < 2 ? pooled["other"] : pooled[cat];
      dst.insert(dst.end(), v.begin(), v.end());
    }
    std::vector<std::vector<double>> samples;
    ordered_json boxes = ordered_json::array();
    for (const auto& [cat, v] : pooled) {
      samples.push_back(v);
      const double mu = stats::mean(v), sd = stats::stddev(v);
      std::vector<double> sorted = v;
      std::sort(sorted.begin(), sorted.end());
      const double median = sorted.size() % 2 ? sorted[sorted.size() / 2]
                                              : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
      boxes.push_back({{"category", cat}, {"count", v.size()}, {"mean", mu}, {"median", median},
                       {"std", sd}, {"box_low", mu - sd}, {"box_high", mu + sd},
                       {"whisker_low", mu - 3 * sd}, {"whisker_high", mu + 3 * sd}});
      csv += std::string(d.name) + "," + text::csv_escape(cat) + "," + std::to_string(v.size()) + "," +
             fmt(mu) + "," + fmt(median) + "," + fmt(sd) + "," + fmt(mu - sd) + "," + fmt(mu + sd) +
             "," + fmt(mu - 3 * sd) + "," + fmt(mu + 3 * sd) + "\n";
    }
    ordered_json row{{"dimension", d.name}, {"groups", pooled.size()}};
    std::size_t total = 0;
    for (const auto& s : samples) total += s.size();
    if (samples.size() >= 2 && total >= 3) {
      if (auto h = stats::kruskal_wallis(samples)) {
        row["H"] = h->H;
        row["p"] = h->p;
        text_summary << d.name << ": H = " << fmt(h->H) << ", p = " << fmt(h->p) << " (" << samples.size() << " groups)\n";
      } else {
        row["H"] = 0.0;
        row["p"] = 1.0;
        row["note"] = "all predicted probabilities identical";
        text_summary << d.name << ": identical probabilities, H = 0\n";
      }
    } else {
      row["H"] = nullptr;
      row["p"] = nullptr;
      row["note"] = "fewer than two groups after pooling";
      text_summary << d.name << ": not testable (" << samples.size() << " group(s))\n";
    }
    row["boxes"] = boxes;
    out.push_back(row);
  }
  j["events_matched"] = matched;
  j["dimensions"] = out;
  w.json("characteristics.json", j);
  w.csv("characteristics.csv",
        "dimension,category,count,mean,median,std,box_low,box_high,whisker_low,whisker_high", csv);
  w.result.summary = text_summary.str();
  return w.result;
}

CommandResult cmd_pred_windows(const RunContext& ctx) {
  Writer w(ctx, "pred-windows");
  const auto datasets = load_datasets(ctx);
  const auto [model, window] = analysis_run(ctx, "pred.run");
  const auto lo = ctx.config.get_size("pred.min", 1), hi = ctx.config.get_size("pred.max", 7);
  if (lo < 1 || hi < lo) throw std::invalid_argument("pred range must satisfy 1 <= min <= max");
  const auto modes = ctx.config.get_list("pred.modes", {"propagation", "aggregation"});
  ordered_json j = w.header();
  j["model"] = model.describe();
  j["window"] = window.label();
  j["window_units"] = "rows of the transformed series (blocks under aggregation)";
  ordered_json rows = ordered_json::array();
  std::string csv;
  std::ostringstream text_summary;
  for (const auto& mode_name : modes) {
    features::PredictionMode mode;
    if (mode_name == "propagation") mode = features::PredictionMode::LabelPropagation;
    else if (mode_name == "aggregation") mode = features::PredictionMode::DateAggregation;
    else throw std::invalid_argument("pred.modes entries must be propagation or aggregation");
    for (const auto& ds : datasets) {
      text_summary << mode_name << " " << ds.state << ":";
      for (std::size_t dp = lo; dp <= hi; ++dp) {
        auto o = cv_options(ctx);
        std::optional<eval::EvalReport> rep;
        std::size_t n = 0, pos = 0;
        try {
          const auto t = features::apply_prediction_window(ds, {dp, mode});
          n = t.n();
          pos = t.positives();
          if (mode == features::PredictionMode::LabelPropagation) o.label_horizon = dp - 1;
          rep = try_cv(w, t, window, model, o);
        } catch (const std::exception& e) {
          w.note("notice: " + ds.state + " dp=" + std::to_string(dp) + " skipped: " + e.what());
        }
        rows.push_back({{"mode", mode_name}, {"state", ds.state}, {"dp", dp}, {"n", n},
                        {"positives", pos},
                        {"auroc_mean", rep ? ordered_json(rep->mean) : ordered_json(nullptr)},
                        {"auroc_std_folds", rep ? ordered_json(rep->std_folds) : ordered_json(nullptr)}});
        csv += mode_name + "," + ds.state + "," + std::to_string(dp) + "," + std::to_string(n) + "," +
               std::to_string(pos) + "," +
               (rep ? fmt(rep->mean) + "," + fmt(rep->std_folds) : std::string(",")) + "\n";
        text_summary << " " << dp << "=" << (rep ? fmt(std::round(rep->mean * 1000) / 1000) : "-");
      }
      text_summary << "\n";
    }
  }
  j["rows"] = rows;
  w.json("pred-windows.json", j);
  w.csv("pred-windows.csv", "mode,state,dp,n,positives,auroc_mean,auroc_std_folds", csv);
  w.result.summary = text_summary.str();
  return w.result;
}

CommandResult cmd_transfer(const RunContext& ctx) {
  Writer w(ctx, "transfer");
  const auto datasets = load_datasets(ctx);
  if (datasets.size() < 2) throw std::invalid_argument("transfer needs at least two states");
  const auto [model, window] = analysis_run(ctx, "transfer.run");
  const auto o = cv_options(ctx);
  const std::size_t S = datasets.size();
  std::vector<std::optional<double>> base(S);
  std::vector<std::vector<std::optional<double>>> delta(S, std::vector<std::optional<double>>(S));
  std::string csv;
  for (std::size_t t = 0; t < S; ++t) {
    if (auto rep = try_cv(w, datasets[t], window, model, o)) base[t] = rep->mean;
    if (!base[t]) continue;
    for (std::size_t s = 0; s < S; ++s) {
      if (s == t) continue;
      auto ox = o;
      ox.extras = {&datasets[s]};
      if (auto rep = try_cv(w, datasets[t], window, model, ox)) delta[t][s] = rep->mean - *base[t];
      csv += datasets[t].state + "," + datasets[s].state + "," + fmt(*base[t]) + "," +
             fmt(delta[t][s]) + "\n";
    }
  }
  auto avg = [](const std::vector<double>& v) -> std::optional<double> {
    if (v.empty()) return std::nullopt;
    return stats::mean(v);
  };
  ordered_json j = w.header();
  j["model"] = model.describe();
  j["window"] = window.label();
  j["reference"] = {{"cell", "NY +CA"}, {"delta", -0.232}};
  ordered_json cells = ordered_json::array();
  ordered_json row_avg = ordered_json::object(), col_avg = ordered_json::object();
  std::ostringstream text_summary;
  text_summary << "test \\ +supp";
  for (const auto& d : datasets) text_summary << "  " << d.state << "    ";
  text_summary << "  avg\n";
  for (std::size_t t = 0; t < S; ++t) {
    std::vector<double> r;
    text_summary << datasets[t].state << "         ";
    for (std::size_t s = 0; s < S; ++s) {
      char buf[16];
      if (s == t) std::snprintf(buf, sizeof buf, "%8s", "--");
      else if (delta[t][s]) std::snprintf(buf, sizeof buf, "%+8.3f", *delta[t][s]);
      else std::snprintf(buf, sizeof buf, "%8s", "n/a");
      text_summary << buf;
      if (s == t) continue;
      cells.push_back({{"test", datasets[t].state}, {"supplement", datasets[s].state},
                       {"baseline", opt(base[t])}, {"delta", opt(delta[t][s])}});
      if (delta[t][s]) r.push_back(*delta[t][s]);
    }
    const auto a = avg(r);
    row_avg[datasets[t].state] = opt(a);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%+8.3f", a.value_or(NAN));
    text_summary << buf << "\n";
  }
  for (std::size_t s = 0; s < S; ++s) {
    std::vector<double> c;
    for (std::size_t t = 0; t < S; ++t)
      if (t != s && delta[t][s]) c.push_back(*delta[t][s]);
    col_avg[datasets[s].state] = opt(avg(c));
  }
  j["cells"] = cells;
  j["row_average"] = row_avg;
  j["column_average"] = col_avg;
  w.json("transfer.json", j);
  w.csv("transfer.csv", "test,supplement,baseline_auroc,delta_auroc", csv);
  w.result.summary = text_summary.str();
  return w.result;
}

CommandResult cmd_group_test(const RunContext& ctx) {
  Writer w(ctx, "group-test");
  const auto datasets = load_datasets(ctx);
  if (datasets.size() < 2) throw std::invalid_argument("group-test needs at least two states");
  const auto [model, window] = analysis_run(ctx, "group.run");
  const auto o = cv_options(ctx);
  const auto lo = ctx.config.get_size("group.min_threshold", 6);
  const auto hi = ctx.config.get_size("group.max_threshold", 16);
  const auto group_threshold = ctx.config.get_size("group.threshold", 6);
  if (hi < lo) throw std::invalid_argument("group thresholds must satisfy min <= max");

  std::vector<std::vector<double>> points;
  for (const auto& ds : datasets) {
    std::vector<double> mu(ds.m(), 0.0);
    for (std::size_t r = 0; r < ds.n(); ++r)
      for (std::size_t c = 0; c < ds.m(); ++c) mu[c] += ds.X(r, c);
    for (auto& v : mu) v /= static_cast<double>(ds.n());
    points.push_back(std::move(mu));
  }
  const auto dendro = stats::hier_cluster(points);

  auto targets = resolve_states(ctx.config.get_list("group.states", {}));
  ordered_json j = w.header();
  j["model"] = model.describe();
  j["window"] = window.label();
  ordered_json merges = ordered_json::array();
  for (const auto& m : dendro.merges)
    merges.push_back({{"a", m.a}, {"b", m.b}, {"distance", m.distance}, {"size", m.size}});
  j["dendrogram"] = {{"method", dendro.method}, {"merges", merges}};
  ordered_json singles = ordered_json::array(), groups = ordered_json::array();
  std::string csv_single, csv_group;
  std::ostringstream text_summary;
  for (std::size_t t = 0; t < datasets.size(); ++t) {
    const auto& base = datasets[t];
    if (!targets.empty() && std::find(targets.begin(), targets.end(), base.state) == targets.end())
      continue;
    std::vector<const ingest::LocationDataset*> ordered;
    ordered_json order_names = ordered_json::array();
    for (auto idx : dendro.similarity_order(t, points)) {
      ordered.push_back(&datasets[idx]);
      order_names.push_back(datasets[idx].state);
    }
    ordered_json sweep = ordered_json::array();
    text_summary << base.state << " (similar: ";
    for (const auto& s : order_names) text_summary << s.get<std::string>() << ' ';
    text_summary << ") single:";
    for (std::size_t thr = lo; thr <= hi; ++thr) {
      auto ox = o;
      ox.extras = ordered;
      ox.event_threshold = thr;
      auto rep = try_cv(w, base, window, model, ox);
      double supp = 0;
      if (rep) {
        for (const auto& f : rep->folds) supp += static_cast<double>(f.supplements.size());
        supp /= static_cast<double>(rep->folds.size());
      }
      sweep.push_back({{"threshold", thr},
                       {"auroc_mean", rep ? ordered_json(rep->mean) : ordered_json(nullptr)},
                       {"auroc_std_folds", rep ? ordered_json(rep->std_folds) : ordered_json(nullptr)},
                       {"mean_supplements", supp}});
      csv_single += base.state + "," + std::to_string(thr) + "," +
                    (rep ? fmt(rep->mean) + "," + fmt(rep->std_folds) : std::string(",")) + "," +
                    fmt(supp) + "\n";
      text_summary << ' ' << (rep ? fmt(std::round(rep->mean * 1000) / 1000) : "-");
    }
    singles.push_back({{"state", base.state}, {"similarity_order", order_names}, {"sweep", sweep}});

    // Pooled group: add states in similarity order until the group has more
    // than `group.threshold` positives, then train and test on the union.
    std::vector<const ingest::LocationDataset*> members;
    std::size_t pos = base.positives();
    for (const auto* d : ordered) {
      if (pos > group_threshold) break;
      members.push_back(d);
      pos += d->positives();
    }
    auto og = o;
    og.extras = members;
    og.pool_test = true;
    auto rep = try_cv(w, base, window, model, og);
    ordered_json names = ordered_json::array({base.state});
    std::string label = base.state;
    for (const auto* d : members) {
      names.push_back(d->state);
      label += "&" + d->state;
    }
    groups.push_back({{"state", base.state}, {"group", names}, {"positives", pos},
                      {"auroc_mean", rep ? ordered_json(rep->mean) : ordered_json(nullptr)},
                      {"auroc_std_folds", rep ? ordered_json(rep->std_folds) : ordered_json(nullptr)}});
    csv_group += base.state + "," + label + "," + std::to_string(pos) + "," +
                 (rep ? fmt(rep->mean) + "," + fmt(rep->std_folds) : std::string(",")) + "\n";
    text_summary << " | group " << label << ": " << (rep ? fmt(std::round(rep->mean * 1000) / 1000) : "-") << "\n";
  }
  j["single_state"] = singles;
  j["groups"] = groups;
  w.json("group-test.json", j);
  w.csv("group-test-thresholds.csv", "state,threshold,auroc_mean,auroc_std_folds,mean_supplements", csv_single);
  w.csv("group-test-groups.csv", "state,group,positives,auroc_mean,auroc_std_folds", csv_group);
  w.result.summary = text_summary.str();
  return w.result;
}

CommandResult cmd_coarse_demo(const RunContext& ctx) {
  Writer w(ctx, "coarse-demo");
  const auto& c = ctx.config;
  const auto basis = c.get_or("coarse.basis", "counts");
  const auto flagged = resolve_states(c.get_list("coarse.states", {"CA", "NY", "TX", "FL", "WA"}));
  std::map<std::string, std::size_t> counts;
  std::size_t days = kReferenceDays;
  if (basis == "counts") {
    for (const auto& [s, n] : reference_attack_counts()) counts[s] = n;
    for (const auto& item : c.get_list("coarse.counts", {})) {
      const auto colon = item.find(':');
      auto v = colon == std::string::npos ? std::nullopt : text::to_int(item.substr(colon + 1));
      auto s = colon == std::string::npos ? std::nullopt : ingest::resolve_state(item.substr(0, colon));
      if (!v || !s || *v < 0) throw std::invalid_argument("coarse.counts entries look like CA:24");
      counts[*s] = static_cast<std::size_t>(*v);
    }
  } else if (basis == "incidents") {
    const auto path = c.get("coarse.incidents");
    if (!path) throw std::invalid_argument("coarse.basis=incidents needs coarse.incidents");
    const auto dates = date_range(make_date(2015, 2, 18), make_date(2018, 12, 31));
    days = dates.size();
    const auto inc = ingest::parse_incidents(*path).records;
    for (const auto& s : ingest::state_codes()) {
      const auto y = ingest::label_vector(inc, s, dates);
      counts[s] = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    }
  } else {
    throw std::invalid_argument("coarse.basis must be counts or incidents");
  }
  const auto demo = coarse_demo(counts, days, flagged);
  ordered_json j = w.header();
  j["basis"] = basis;
  j["states"] = demo.states;
  j["days"] = demo.days;
  j["instances"] = demo.instances;
  j["positives"] = demo.positives;
  j["flagged_states"] = demo.flagged;
  j["flagged_instances"] = demo.flagged_instances;
  j["flagged_positives"] = demo.flagged_positives;
  j["auroc"] = demo.auroc;
  j["auprc"] = demo.auprc;
  j["baseline_auroc"] = demo.baseline_auroc;
  j["baseline_auprc"] = demo.baseline_auprc;
  j["prevalence"] = demo.prevalence;
  j["conventions"] = conventions();
  j["reference"] = {{"auroc", 0.733}, {"auprc", 0.468}, {"baseline_auroc", 0.5}, {"baseline_auprc", 0.003}};
  ordered_json imb = ordered_json::object();
  std::string csv;
  for (const auto& s : ingest::state_codes()) {
    const auto n = counts.count(s) ? counts.at(s) : 0;
    const double v = static_cast<double>(n) / static_cast<double>(days);
    imb[s] = v;
    csv += s + "," + std::to_string(n) + "," + fmt(v) + "\n";
  }
  j["imbalance"] = imb;
  w.json("coarse-demo.json", j);
  w.csv("coarse-demo-imbalance.csv", "state,attack_days,imbalance", csv);
  ordered_json ref = w.header();
  ref["reference"] = ordered_json::parse(reference_manifest_json());
  w.json("reference.json", ref);
  std::ostringstream s;
  char line[200];
  std::snprintf(line, sizeof line,
                "instances %zu, positives %zu, prevalence %.5f\n"
                "always-attack model (%zu flagged states): AUROC %.4f  AUPRC %.4f\n"
                "constant-score baseline:                  AUROC %.4f  AUPRC %.4f\n",
                demo.instances, demo.positives, demo.prevalence, demo.flagged.size(), demo.auroc,
                demo.auprc, demo.baseline_auroc, demo.baseline_auprc);
  s << line << "reference: AUROC 0.733  AUPRC 0.468, baselines 0.500 / 0.003\n";
  w.result.summary = s.str();
  return w.result;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {
      "ingest",   "synth",        "baseline", "sweep-windows", "temporal-locality", "train-corr",
      "ablate",   "characteristics", "pred-windows", "transfer", "group-test", "coarse-demo"};
  return names;
}

CommandResult run_command(const std::string& name, const RunContext& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  CommandResult r;
  if (name == "ingest") r = cmd_ingest(ctx);
  else if (name == "synth") r = cmd_synth(ctx);
  else if (name == "baseline") r = cmd_baseline(ctx);
  else if (name == "sweep-windows") r = cmd_sweep(ctx);
  else if (name == "temporal-locality") r = cmd_locality(ctx);
  else if (name == "train-corr") r = cmd_train_corr(ctx);
  else if (name == "ablate") r = cmd_ablate(ctx);
  else if (name == "characteristics") r = cmd_characteristics(ctx);
  else if (name == "pred-windows") r = cmd_pred_windows(ctx);
  else if (name == "transfer") r = cmd_transfer(ctx);
  else if (name == "group-test") r = cmd_group_test(ctx);
  else if (name == "coarse-demo") r = cmd_coarse_demo(ctx);
  else throw std::invalid_argument("unknown command: " + name);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream log(ctx.out / (name + ".log"), std::ios::app);
  log << name << " fingerprint=" << r.fingerprint << " seconds=" << secs
      << " threads=" << ctx.threads << " files=" << r.files.size() << "\n";
  return r;
}

}  // namespace eventcast::experiments
