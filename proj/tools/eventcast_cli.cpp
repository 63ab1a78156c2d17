#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "eventcast/experiments.hpp"

namespace ex = eventcast::experiments;

int main(int argc, char** argv) {
  CLI::App app{"eventcast: daily event forecasting from news-derived features"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, profile = "desk", out = "out";
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned threads = 0;
  std::vector<std::string> overrides;
  bool quiet = false;

  app.add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
  app.add_option_function<std::uint64_t>(
      "--seed", [&](std::uint64_t s) { seed = s; seed_given = true; }, "master seed");
  app.add_option("--profile", profile, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--out", out, "output directory");
  app.add_option("--threads", threads, "worker threads (results do not depend on it)");
  app.add_option("--set", overrides, "config override key=value (repeatable)");
  app.add_flag("--quiet", quiet, "suppress progress notes");
  bool list_keys = false;
  app.add_flag("--list-keys", list_keys, "print every config key and exit");

  const char* about[][2] = {
      {"ingest", "build per-state daily datasets from GKG/Events exports and incident records"},
      {"synth", "write synthetic per-state datasets and incidents"},
      {"baseline", "cross-validated summary grid of models and windows per state"},
      {"sweep-windows", "AUROC as a function of the moving-average window"},
      {"temporal-locality", "days since the previous event vs predicted probability"},
      {"train-corr", "training positives vs fold AUROC"},
      {"ablate", "drop one feature group at a time"},
      {"characteristics", "Kruskal-Wallis tests of probabilities across incident categories"},
      {"pred-windows", "label propagation and date aggregation over prediction windows"},
      {"transfer", "change in AUROC from adding one other state's data"},
      {"group-test", "similarity-ordered supplementation and pooled group testing"},
      {"coarse-demo", "state-level constant predictor on the full state-day grid"}};
  for (const auto& a : about) app.add_subcommand(a[0], a[1]);
  // --list-keys needs no subcommand.
  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (list_keys) {
      for (const auto& [k, d] : ex::Config::schema()) std::cout << k << "\t" << d << "\n";
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      return 2;
    }
    ex::RunContext ctx;
    if (!config_path.empty()) ctx.config = ex::Config::load(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value: " + kv);
      ctx.config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed_given) ctx.config.set("seed", std::to_string(seed));
    ctx.seed = ctx.config.get_size("seed", 0);
    if (app.count("--profile")) ctx.config.set("profile", profile);
    ctx.profile = eventcast::eval::parse_profile(ctx.config.get_or("profile", "desk"));
    ctx.out = out;
    if (threads == 0) threads = static_cast<unsigned>(ctx.config.get_size("threads", 0));
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    ctx.threads = threads;
    if (!quiet) ctx.log = &std::cerr;

    const auto name = app.get_subcommands().front()->get_name();
    const auto result = ex::run_command(name, ctx);
    std::cout << result.summary;
    std::cout << "fingerprint " << result.fingerprint << "\n";
    for (const auto& f : result.files) std::cout << "wrote " << f.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
