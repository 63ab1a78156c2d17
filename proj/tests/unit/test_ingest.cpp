#include <gtest/gtest.h>

#include <filesystem>

#include "eventcast/ingest.hpp"
#include "eventcast/stats.hpp"

using namespace eventcast;
using namespace eventcast::ingest;

namespace {
const std::string kData = EVENTCAST_TEST_DATA;
}

TEST(States, CodesAndNames) {
  EXPECT_EQ(state_codes().size(), 51u);
  EXPECT_EQ(resolve_state("New York"), "NY");
  EXPECT_EQ(resolve_state("ny"), "NY");
  EXPECT_EQ(resolve_state("District of Columbia"), "DC");
  EXPECT_FALSE(resolve_state("Atlantis").has_value());
  EXPECT_EQ(states_by_attack_frequency().front(), "CA");
}

TEST(Registry, CanonicalSizes) {
  const auto& r = FeatureRegistry::canonical();
  EXPECT_EQ(r.themes().size(), 283u);
  EXPECT_EQ(r.cameo_codes().size(), 148u);
  EXPECT_EQ(r.feature_count(), 862u);
  const auto ids = r.feature_ids();
  EXPECT_EQ(FeatureId::parse(ids[300].name()), ids[300]);
  EXPECT_TRUE(r.cameo_index("015").has_value());
}

TEST(NewsParse, GkgExampleRow) {
  const std::string text =
      "DATE\tV2Themes\tV2Locations\tV2Tone\n"
      "20160101\tTERROR;PROTEST\tNew York\t-3.5,1,4.5\n";
  auto r = parse_news_text(text, NewsFormat::Gkg);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].themes, (std::vector<std::string>{"TERROR", "PROTEST"}));
  EXPECT_EQ(r.records[0].tone, -3.5);
  EXPECT_EQ(r.records[0].state, "NY");
}

TEST(NewsParse, EventsCodeKept) {
  const std::string text =
      "SQLDATE\tEventBaseCode\tAvgTone\tActionGeo_FullName\tActionGeo_CountryCode\tActionGeo_ADM1Code\n"
      "20160101\t015\t1.0\tBoston, Massachusetts, United States\tUS\tUSMA\n";
  auto r = parse_news_text(text, NewsFormat::Events);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].cameo_base_code, "015");
  EXPECT_EQ(r.records[0].state, "MA");
}

TEST(NewsParse, EmptyInput) {
  auto r = parse_news_text("", NewsFormat::Gkg);
  EXPECT_TRUE(r.records.empty());
  EXPECT_EQ(r.stats.rows, 0u);
  EXPECT_EQ(r.stats.malformed, 0u);
}

TEST(NewsParse, FixtureCounters) {
  auto g = parse_news_file(kData + "/gkg_sample.tsv", NewsFormat::Gkg);
  EXPECT_EQ(g.stats.rows, 7u);
  EXPECT_EQ(g.stats.malformed, 2u);
  EXPECT_EQ(g.stats.unresolved_state, 1u);
  EXPECT_EQ(g.records.size(), 5u);  // the CA+NY row counts for both states
  auto e = parse_news_file(kData + "/events_sample.tsv", NewsFormat::Events);
  EXPECT_EQ(e.stats.rows, 6u);
  EXPECT_EQ(e.stats.malformed, 1u);
  EXPECT_EQ(e.stats.unresolved_state, 1u);
  EXPECT_EQ(e.records.size(), 4u);
  EXPECT_THROW(parse_news_file(kData + "/missing.tsv", NewsFormat::Gkg), std::runtime_error);
}

TEST(DailyFeatures, CountsAndMeanTone) {
  const auto dates = date_range(make_date(2016, 1, 1), make_date(2016, 1, 2));
  const Date d = dates[0];
  std::vector<NewsRecord> recs;
  for (double tone : {-1.0, 0.0, 2.0}) recs.push_back({d, "NY", {"TERROR"}, std::nullopt, tone});
  recs.push_back({d, "NY", {"PROTEST", "KILL"}, std::string("190"), 4.0});
  recs.push_back({make_date(2017, 1, 1), "NY", {"TERROR"}, std::nullopt, 9.0});  // out of range
  const auto& reg = FeatureRegistry::canonical();
  const auto X = build_daily_features(recs, "NY", dates, reg);
  const auto t = *reg.theme_index("TERROR");
  const std::size_t T = reg.themes().size(), C = reg.cameo_codes().size();
  EXPECT_EQ(X(0, t), 3.0);
  EXPECT_NEAR(X(0, T + t), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(X(0, *reg.theme_index("PROTEST")), 1.0);
  EXPECT_EQ(X(0, *reg.theme_index("KILL")), 1.0);
  EXPECT_EQ(X(0, 2 * T + *reg.cameo_index("190")), 1.0);
  EXPECT_EQ(X(0, 2 * T + C + *reg.cameo_index("190")), 4.0);
  EXPECT_EQ(X(0, 2 * T + *reg.cameo_index("112")), 0.0);
  EXPECT_EQ(X(0, 2 * T + C + *reg.cameo_index("112")), 0.0);
  for (std::size_t c = 0; c < X.cols(); ++c) EXPECT_EQ(X(1, c), 0.0);
}

TEST(DailyFeatures, FixtureEndToEnd) {
  const auto dates = date_range(make_date(2016, 1, 1), make_date(2016, 1, 10));
  auto recs = parse_news_file(kData + "/gkg_sample.tsv", NewsFormat::Gkg).records;
  const auto& reg = FeatureRegistry::canonical();
  const auto X = build_daily_features(recs, "NY", dates, reg);
  const auto t = *reg.theme_index("TERROR");
  EXPECT_EQ(X(0, t), 2.0);
  EXPECT_NEAR(X(0, reg.themes().size() + t), -3.25, 1e-15);
  EXPECT_EQ(X(4, *reg.theme_index("KILL")), 1.0);
}

TEST(Incidents, ExamplesAndCounters) {
  auto r = parse_incidents_text(
      "eventid,iyear,imonth,iday,provstate\n1,2016,8,9,New York\n2,2016,8,0,New York\n"
      "3,2016,8,9,New York\n");
  ASSERT_EQ(r.records.size(), 2u);  // duplicates kept
  EXPECT_EQ(r.records[0].state, "NY");
  EXPECT_EQ(r.records[0].date, make_date(2016, 8, 9));
  EXPECT_EQ(r.stats.malformed, 1u);

  auto f = parse_incidents(kData + "/incidents_sample.csv");
  EXPECT_EQ(f.stats.rows, 6u);
  EXPECT_EQ(f.stats.malformed, 1u);
  EXPECT_EQ(f.stats.unresolved_state, 1u);
  EXPECT_EQ(f.records.size(), 4u);
}

TEST(Incidents, LabelVectorDeduplicates) {
  const auto dates = date_range(make_date(2016, 1, 1), make_date(2016, 1, 10));
  auto inc = parse_incidents(kData + "/incidents_sample.csv").records;
  auto y = label_vector(inc, "NY", dates);
  EXPECT_EQ(std::count(y.begin(), y.end(), 1), 1);
  EXPECT_EQ(y[1], 1);
  EXPECT_EQ(unique_incident_days(inc, dates.front(), dates.back()), 3u);
  auto none = label_vector({}, "NY", dates);
  EXPECT_EQ(std::count(none.begin(), none.end(), 1), 0);
}

TEST(Dataset, CsvRoundTripIsBitExact) {
  SynthConfig c;
  c.n_days = 60;
  c.m_features = 12;
  c.imbalance = 0.1;
  c.seed = 3;
  auto ds = synth_generate(c).at(0);
  ds.X(0, 0) = 0.1 + 0.2;  // needs all 17 digits
  const auto text = dataset_to_csv(ds, "note");
  const auto back = dataset_from_csv(text, ds.state);
  EXPECT_EQ(back.X, ds.X);
  EXPECT_EQ(back.y, ds.y);
  EXPECT_EQ(back.dates, ds.dates);
  EXPECT_EQ(back.features, ds.features);
  const auto p = std::filesystem::temp_directory_path() / "eventcast_ds_roundtrip.csv";
  write_dataset(p, ds);
  EXPECT_EQ(read_dataset(p, ds.state).X, ds.X);
  std::filesystem::remove(p);
}

TEST(Dataset, WithFeaturesDropsColumns) {
  SynthConfig c;
  c.n_days = 50;
  c.m_features = 8;
  c.imbalance = 0.1;
  auto ds = synth_generate(c).at(0);
  auto sub = ds.with_features({1, 3});
  EXPECT_EQ(sub.m(), 2u);
  EXPECT_EQ(sub.X(5, 1), ds.X(5, 3));
  EXPECT_EQ(sub.features[0], ds.features[1]);
}

TEST(Synth, DeterministicAndSized) {
  SynthConfig c;
  c.n_days = 200;
  c.m_features = 20;
  c.n_states = 3;
  c.imbalance = 0.05;
  c.seed = 9;
  c.signal = PlantedSignal{};
  const auto a = synth_generate(c), b = synth_generate(c);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t s = 0; s < 3; ++s) {
    EXPECT_EQ(a[s].X, b[s].X);
    EXPECT_EQ(a[s].y, b[s].y);
    EXPECT_EQ(a[s].positives(), 10u);
    EXPECT_DOUBLE_EQ(a[s].imbalance(), 10.0 / 200.0);
  }
  EXPECT_EQ(a[0].state, "CA");
  c.seed = 10;
  EXPECT_NE(synth_generate(c)[0].X, a[0].X);
}

TEST(Synth, RejectsUnrepresentableImbalance) {
  SynthConfig c;
  c.n_days = 50;
  c.imbalance = 0.01;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Synth, NoSignalFeaturesIndependentOfLabels) {
  SynthConfig c;
  c.n_days = 2000;
  c.m_features = 5;
  c.imbalance = 0.1;
  const auto ds = synth_generate(c).at(0);
  for (std::size_t j = 0; j < ds.m(); ++j) {
    std::vector<double> ev, ne;
    for (std::size_t i = 0; i < ds.n(); ++i) (ds.y[i] ? ev : ne).push_back(ds.X(i, j));
    EXPECT_LT(stats::ks_two_sample(ev, ne).D, 0.15);
  }
}

TEST(Synth, PlantedSignalShiftsAffectedFeatures) {
  SynthConfig c;
  c.n_days = 800;
  c.m_features = 40;
  c.imbalance = 0.02;
  c.signal = PlantedSignal{};
  const auto ds = synth_generate(c).at(0);
  const auto cols = synth_affected_features(c, 0);
  EXPECT_EQ(cols.size(), 10u);
  // Days just before events carry an elevated mean in the affected columns.
  double pre = 0, other = 0;
  std::size_t np = 0, no = 0;
  std::vector<int> before(ds.n(), 0);
  for (std::size_t i = 0; i < ds.n(); ++i)
    if (ds.y[i])
      for (std::size_t k = 1; k <= 7 && k <= i; ++k) before[i - k] = 1;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    (before[i] ? pre : other) += ds.X(i, cols[0]);
    (before[i] ? np : no)++;
  }
  EXPECT_GT(pre / np - other / no, 2.0);
}

TEST(Synth, IncidentsOnePerPositiveDay) {
  SynthConfig c;
  c.n_days = 100;
  c.m_features = 8;
  c.n_states = 2;
  c.imbalance = 0.05;
  const auto ds = synth_generate(c);
  const auto inc = synth_incidents(ds, 1);
  EXPECT_EQ(inc.size(), ds[0].positives() + ds[1].positives());
  for (const auto& i : inc) {
    const auto& d = ds[i.state == ds[0].state ? 0 : 1];
    const auto row = static_cast<std::size_t>((i.date - d.dates[0]).count());
    EXPECT_EQ(d.y[row], 1);
  }
}

TEST(Incidents, WriteReadRoundTripWithComment) {
  SynthConfig c;
  c.n_days = 120;
  c.m_features = 3;
  c.n_states = 2;
  c.imbalance = 0.05;
  const auto inc = synth_incidents(synth_generate(c), 4);
  const auto path = std::filesystem::temp_directory_path() / "ec_incidents_rt.csv";
  write_incidents(path, inc, "fingerprint=abc");
  const auto back = parse_incidents(path);
  ASSERT_EQ(back.records.size(), inc.size());
  for (std::size_t i = 0; i < inc.size(); ++i) {
    EXPECT_EQ(back.records[i].state, inc[i].state);
    EXPECT_EQ(back.records[i].date, inc[i].date);
    EXPECT_EQ(back.records[i].group_name, inc[i].group_name);
  }
}
