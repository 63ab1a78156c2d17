#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "eventcast/experiments.hpp"
#include "oracles.hpp"
#include "text.hpp"

using namespace eventcast;
using namespace eventcast::experiments;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

RunContext tiny(const std::string& dir) {
  RunContext ctx;
  ctx.config = Config::parse(
      "synth.n_days = 240\nsynth.m_features = 8\nsynth.n_states = 3\nsynth.imbalance = 0.05\n"
      "repeats = 1\nrf.estimators = 10\nada.estimators = 10\nnn.epochs = 1\nnn.hidden = 4\n"
      "lstm.hidden = 4\n");
  ctx.seed = 3;
  ctx.out = fs::temp_directory_path() / dir;
  fs::remove_all(ctx.out);
  return ctx;
}

json read_json(const fs::path& p) { return json::parse(text::read_file(p.string())); }

}  // namespace

TEST(Config, ParseAndValidate) {
  auto c = Config::parse("# comment\n repeats = 3 \nstates = NY, CA\n\n");
  EXPECT_EQ(c.get_size("repeats", 10), 3u);
  EXPECT_EQ(c.get_list("states", {}), (std::vector<std::string>{"NY", "CA"}));
  EXPECT_EQ(c.get_or("model", "rf"), "rf");
  EXPECT_THROW(Config::parse("repeets = 3\n"), std::invalid_argument);
  EXPECT_THROW(Config::parse("repeats 3\n"), std::invalid_argument);
  EXPECT_THROW(c.get_bool("repeats", false), std::invalid_argument);
  c.set("threads", "8");
  EXPECT_EQ(c.canonical().find("threads"), std::string::npos);
}

TEST(Config, RunSpecOverrides) {
  RunContext ctx;
  ctx.config.set("rf.estimators", "7");
  ctx.config.set("nn.hidden", "5");
  auto [m, w] = parse_run_spec("rf:dt*=14", ctx);
  EXPECT_EQ(m.estimators, 7u);
  EXPECT_EQ(w.label(), "dt*=14");
  EXPECT_EQ(model_from_config("ffnn2", ctx).hidden, 5u);
  ctx.profile = eval::Profile::Paper;
  EXPECT_EQ(model_from_config("lstm", ctx).hidden, 1024u);
  EXPECT_THROW(parse_run_spec("rf", ctx), std::invalid_argument);
}

TEST(Reference, AttackCountsAndImbalance) {
  const auto& counts = reference_attack_counts();
  EXPECT_EQ(counts.size(), 51u);
  std::size_t total = 0;
  for (const auto& [s, c] : counts) total += c;
  EXPECT_EQ(total, 207u);
  for (std::size_t c : {24u, 18u, 14u}) {
    const auto y = labels_from_count(c, kReferenceDays);
    const double imb = static_cast<double>(std::accumulate(y.begin(), y.end(), 0)) / y.size();
    EXPECT_EQ(imb, static_cast<double>(c) / 1413.0);
  }
  EXPECT_EQ(reference_cell("rf", "dt*=14", "NY"), ".685 ± .057");
  EXPECT_EQ(reference_cell("ffnn2", "stack=7", "CA"), ".680 ± .073");
  EXPECT_FALSE(reference_cell("rf", "dt=3", "NY").has_value());
  EXPECT_EQ(baseline_grid().size(), 12u);
  auto manifest = json::parse(reference_manifest_json());
  EXPECT_EQ(manifest["transfer_NY_plus_CA"], -0.232);
}

TEST(CoarseDemo, MatchesPairwiseOracle) {
  std::map<std::string, std::size_t> counts;
  for (const auto& [s, c] : reference_attack_counts()) counts[s] = c;
  const std::vector<std::string> flagged{"CA", "NY", "TX", "FL", "WA"};
  const auto d = coarse_demo(counts, kReferenceDays, flagged);
  EXPECT_EQ(d.instances, 72063u);
  EXPECT_EQ(d.positives, 207u);
  EXPECT_EQ(d.flagged_positives, 97u);
  EXPECT_EQ(d.baseline_auroc, 0.5);
  EXPECT_NEAR(d.baseline_auprc, 0.003, 5e-4);
  // Score 1 on flagged states: closed-form pair count.
  const double P = 207, N = 72063 - 207, tp = 97, fp = 7065 - 97;
  const double pairs_won = tp * (N - fp) + 0.5 * (tp * fp + (P - tp) * (N - fp));
  EXPECT_NEAR(d.auroc, pairs_won / (P * N), 1e-12);
  // Two thresholds: {1} then {1, 0}.
  const double ap = (tp / 7065) * (tp / P) + (P / 72063) * ((P - tp) / P);
  EXPECT_NEAR(d.auprc, ap, 1e-12);

  std::vector<double> s;
  std::vector<int> y;
  for (const auto& st : ingest::state_codes()) {
    const bool hot = std::find(flagged.begin(), flagged.end(), st) != flagged.end();
    for (int v : labels_from_count(counts[st], kReferenceDays)) {
      s.push_back(hot);
      y.push_back(v);
    }
  }
  EXPECT_NEAR(d.auroc, oracle::pairwise_auroc(s, y), 1e-12);
}

TEST(Commands, CoarseDemoWritesReference) {
  auto ctx = tiny("ec_coarse");
  const auto r = run_command("coarse-demo", ctx);
  const auto j = read_json(ctx.out / "coarse-demo.json");
  EXPECT_EQ(j["fingerprint"], r.fingerprint);
  EXPECT_EQ(j["positives"], 207);
  EXPECT_EQ(j["reference"]["auroc"], 0.733);
  EXPECT_TRUE(fs::exists(ctx.out / "coarse-demo.log"));
}

TEST(Commands, CoarseDemoIncidentsBasis) {
  auto ctx = tiny("ec_coarse_inc");
  ctx.config.set("coarse.basis", "incidents");
  ctx.config.set("coarse.incidents", std::string(EVENTCAST_TEST_DATA) + "/incidents_sample.csv");
  run_command("coarse-demo", ctx);
  const auto j = read_json(ctx.out / "coarse-demo.json");
  EXPECT_EQ(j["positives"], 3);
}

TEST(Commands, IngestFixtures) {
  auto ctx = tiny("ec_ingest");
  const std::string d = EVENTCAST_TEST_DATA;
  ctx.config.set("ingest.gkg", d + "/gkg_sample.tsv");
  ctx.config.set("ingest.events", d + "/events_sample.tsv");
  ctx.config.set("ingest.incidents", d + "/incidents_sample.csv");
  ctx.config.set("ingest.start", "2016-01-01");
  ctx.config.set("ingest.end", "2016-01-10");
  run_command("ingest", ctx);
  const auto j = read_json(ctx.out / "ingest.json");
  EXPECT_EQ(j["datasets"].size(), 3u);  // CA, NY, TX
  const auto ny = ingest::read_dataset(ctx.out / "datasets" / "NY.csv", "NY");
  EXPECT_EQ(ny.n(), 10u);
  EXPECT_EQ(ny.m(), 862u);
  EXPECT_EQ(ny.positives(), 1u);
  for (const auto& row : j["datasets"])
    EXPECT_DOUBLE_EQ(row["imbalance"].get<double>(),
                     row["positives"].get<double>() / row["n"].get<double>());
}

TEST(Commands, SynthThenLoadFromDataDir) {
  auto ctx = tiny("ec_synth");
  run_command("synth", ctx);
  auto ctx2 = tiny("ec_synth_load");
  ctx2.config.set("data_dir", (ctx.out / "datasets").string());
  const auto loaded = load_datasets(ctx2);
  const auto direct = load_datasets(ctx);
  ASSERT_EQ(loaded.size(), direct.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(loaded[i].X, direct[i].X);
    EXPECT_EQ(loaded[i].y, direct[i].y);
  }
}

TEST(Commands, BaselineRandomRowAndSweepConsistency) {
  auto ctx = tiny("ec_base");
  ctx.config.set("baseline.rows", "random:dt=1,rf:dt=1");
  ctx.config.set("states", "CA");
  run_command("baseline", ctx);
  const auto b = read_json(ctx.out / "baseline.json");
  ASSERT_EQ(b["rows"].size(), 2u);
  EXPECT_EQ(b["rows"][0]["auroc_mean"], 0.5);
  EXPECT_EQ(b["rows"][0]["auroc_std_folds"], 0.0);
  ctx.config.set("sweep.max", "2");
  run_command("sweep-windows", ctx);
  const auto s = read_json(ctx.out / "sweep-windows.json");
  EXPECT_EQ(s["curves"][0]["points"].size(), 2u);
  EXPECT_EQ(s["curves"][0]["points"][0]["auroc_mean"], b["rows"][1]["auroc_mean"]);
}

TEST(Commands, TrainCorrFoldCount) {
  auto ctx = tiny("ec_corr");
  ctx.config.set("repeats", "2");
  run_command("train-corr", ctx);
  const auto j = read_json(ctx.out / "train-corr.json");
  EXPECT_EQ(j["folds"], 5 * 3 * 2);
}

TEST(Commands, AblateReducesWidthByGroup) {
  auto ctx = tiny("ec_ablate");
  ctx.config.set("states", "CA");
  run_command("ablate", ctx);
  const auto j = read_json(ctx.out / "ablate.json");
  ASSERT_EQ(j["rows"].size(), 5u);
  EXPECT_EQ(j["rows"][0]["m"], 8);
  std::size_t dropped = 0;
  for (std::size_t i = 1; i < 5; ++i) dropped += 8 - j["rows"][i]["m"].get<std::size_t>();
  EXPECT_EQ(dropped, 8u);
}

TEST(Commands, PredWindowsIdentityAtOne) {
  auto ctx = tiny("ec_pred");
  ctx.config.set("states", "CA");
  ctx.config.set("pred.max", "2");
  run_command("pred-windows", ctx);
  const auto j = read_json(ctx.out / "pred-windows.json");
  ASSERT_EQ(j["rows"].size(), 4u);
  EXPECT_EQ(j["rows"][0]["auroc_mean"], j["rows"][2]["auroc_mean"]);  // dp=1 in both modes
  EXPECT_EQ(j["rows"][3]["n"], 120);
}

TEST(Commands, TransferHeatmapShape) {
  auto ctx = tiny("ec_transfer");
  run_command("transfer", ctx);
  const auto j = read_json(ctx.out / "transfer.json");
  EXPECT_EQ(j["cells"].size(), 3u * 3u - 3u);
  EXPECT_EQ(j["row_average"].size(), 3u);
}

TEST(Commands, GroupTestSweepPoints) {
  auto ctx = tiny("ec_group");
  ctx.config.set("group.states", "CA");
  run_command("group-test", ctx);
  const auto j = read_json(ctx.out / "group-test.json");
  ASSERT_EQ(j["single_state"].size(), 1u);
  EXPECT_EQ(j["single_state"][0]["sweep"].size(), 11u);
  for (const auto& s : j["single_state"][0]["similarity_order"]) EXPECT_NE(s, "CA");
  EXPECT_EQ(j["dendrogram"]["merges"].size(), 2u);
}

TEST(Commands, CharacteristicsAndLocality) {
  auto ctx = tiny("ec_char");
  run_command("characteristics", ctx);
  const auto j = read_json(ctx.out / "characteristics.json");
  EXPECT_EQ(j["dimensions"].size(), 4u);
  run_command("temporal-locality", ctx);
  const auto t = read_json(ctx.out / "temporal-locality.json");
  std::size_t events = 0;
  for (const auto& s : t["states"]) events += s["events"].get<std::size_t>();
  EXPECT_EQ(t["pooled"]["events"], events);
}

TEST(Commands, UnknownCommandThrows) {
  auto ctx = tiny("ec_unknown");
  EXPECT_THROW(run_command("plot", ctx), std::invalid_argument);
  EXPECT_EQ(command_names().size(), 12u);
}
