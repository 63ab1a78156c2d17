#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>

#include "eventcast/eval.hpp"
#include "eventcast/experiments.hpp"
#include "eventcast/features.hpp"
#include "eventcast/ingest.hpp"
#include "eventcast/stats.hpp"

namespace py = pybind11;
using namespace eventcast;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
  Matrix X(a.shape(0), a.shape(1));
  std::copy(a.data(), a.data() + a.size(), X.data().begin());
  return X;
}

Array to_array(const Matrix& X) {
  Array a({X.rows(), X.cols()});
  std::copy(X.data().begin(), X.data().end(), a.mutable_data());
  return a;
}

std::vector<int> to_labels(const IntArray& y) { return {y.data(), y.data() + y.size()}; }

ingest::LocationDataset make_dataset(const Array& X, const IntArray& y, const std::string& state) {
  ingest::LocationDataset ds;
  ds.state = state;
  ds.X = to_matrix(X);
  ds.y = to_labels(y);
  const Date start = make_date(2015, 2, 18);
  for (std::size_t i = 0; i < ds.X.rows(); ++i) ds.dates.push_back(start + std::chrono::days(i));
  ds.features = ingest::synthetic_feature_ids(ds.X.cols());
  ds.validate();
  return ds;
}

}  // namespace

PYBIND11_MODULE(_eventcast, m) {
  m.doc() = "Event forecasting core: windowed features, ensembles, neural nets, purged CV.";

  m.def("ks_two_sample", [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto r = stats::ks_two_sample(a, b);
    return py::make_tuple(r.D, r.p);
  }, py::arg("a"), py::arg("b"), "Two-sample K-S test; returns (D, p).");

  m.def("auroc", [](const std::vector<double>& s, const std::vector<int>& y) { return stats::auroc(s, y); },
        py::arg("scores"), py::arg("labels"), "AUROC with ties counted half; None for a single class.");
  m.def("auprc", [](const std::vector<double>& s, const std::vector<int>& y) { return stats::auprc(s, y); },
        py::arg("scores"), py::arg("labels"));
  m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return stats::spearman(x, y); },
        py::arg("x"), py::arg("y"));
  m.def("kruskal_wallis", [](const std::vector<std::vector<double>>& groups) -> py::object {
    const auto r = stats::kruskal_wallis(groups);
    if (!r) return py::none();
    return py::make_tuple(r->H, r->p);
  }, py::arg("groups"), "Returns (H, p), or None when every value is identical.");

  m.def("moving_average", [](const std::vector<double>& col, std::size_t dt) {
    const auto v = features::moving_average(col, dt);
    return py::array_t<double>(v.size(), v.data());
  }, py::arg("column"), py::arg("dt"), "Mean of the dt preceding days; the first dt entries are NaN.");

  m.def("ks_fit", [](const Array& X, const IntArray& y, std::size_t dt_max, unsigned threads) {
    const auto f = features::ks_fit(to_matrix(X), to_labels(y), dt_max, threads);
    py::dict d;
    d["t"] = f.t;
    d["p_min"] = f.p_min;
    d["degenerate"] = f.degenerate;
    return d;
  }, py::arg("X"), py::arg("y"), py::arg("dt_max"), py::arg("threads") = 1);

  m.def("make_folds", [](std::size_t n, std::size_t k) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& f : eval::make_folds(n, k).folds) out.emplace_back(f.start, f.end);
    return out;
  }, py::arg("n"), py::arg("k") = 5, "Contiguous folds as inclusive (start, end) pairs.");

  m.def("purge_rows", [](std::size_t start, std::size_t end, std::size_t dt, std::size_t n, std::size_t horizon) {
    return eval::purge_rows({start, end}, dt, n, horizon);
  }, py::arg("start"), py::arg("end"), py::arg("dt"), py::arg("n"), py::arg("horizon") = 0);

  m.def("synth_generate", [](std::size_t n_days, std::size_t m_features, std::size_t n_states, double imbalance,
                             bool planted, std::uint64_t seed) {
    ingest::SynthConfig c;
    c.n_days = n_days;
    c.m_features = m_features;
    c.n_states = n_states;
    c.imbalance = imbalance;
    c.seed = seed;
    if (planted) c.signal = ingest::PlantedSignal{};
    py::list out;
    std::size_t i = 0;
    for (const auto& ds : ingest::synth_generate(c)) {
      py::dict d;
      d["state"] = ds.state;
      d["X"] = to_array(ds.X);
      d["y"] = py::array_t<int>(ds.y.size(), ds.y.data());
      d["start"] = format_date(ds.dates.front());
      d["affected"] = planted ? ingest::synth_affected_features(c, i) : std::vector<std::size_t>{};
      out.append(d);
      ++i;
    }
    return out;
  }, py::arg("n_days") = 800, py::arg("m_features") = 40, py::arg("n_states") = 1, py::arg("imbalance") = 0.02,
     py::arg("planted") = false, py::arg("seed") = 0);

  m.def("run_cv", [](const Array& X, const IntArray& y, const std::string& window, const std::string& model,
                     std::size_t repeats, std::uint64_t seed, unsigned threads, std::optional<std::size_t> estimators,
                     std::optional<std::size_t> hidden, std::optional<std::size_t> epochs, const std::string& profile) {
    const auto ds = make_dataset(X, y, "XX");
    auto spec = eval::default_model(model, eval::parse_profile(profile));
    if (estimators) spec.estimators = *estimators;
    if (hidden) spec.hidden = *hidden;
    if (epochs) spec.optimizer.epochs = *epochs;
    eval::CvOptions o;
    o.repeats = repeats;
    o.seed = seed;
    o.threads = threads;
    py::gil_scoped_release release;
    return eval::report_json(eval::run_cv(ds, features::WindowSpec::parse(window), spec, o));
  }, py::arg("X"), py::arg("y"), py::arg("window") = "dt*=14", py::arg("model") = "rf", py::arg("repeats") = 10,
     py::arg("seed") = 0, py::arg("threads") = 1, py::arg("estimators") = py::none(), py::arg("hidden") = py::none(),
     py::arg("epochs") = py::none(), py::arg("profile") = "desk",
     "Purged cross validation; returns the report as a JSON string.");

  m.def("coarse_demo", [](const std::map<std::string, std::size_t>& counts, std::size_t days,
                          const std::vector<std::string>& flagged) {
    const auto d = experiments::coarse_demo(counts, days, flagged);
    py::dict r;
    r["instances"] = d.instances;
    r["positives"] = d.positives;
    r["flagged_instances"] = d.flagged_instances;
    r["flagged_positives"] = d.flagged_positives;
    r["auroc"] = d.auroc;
    r["auprc"] = d.auprc;
    r["baseline_auroc"] = d.baseline_auroc;
    r["baseline_auprc"] = d.baseline_auprc;
    r["prevalence"] = d.prevalence;
    return r;
  }, py::arg("counts"), py::arg("days"), py::arg("flagged"));

  m.def("reference_attack_counts", [] {
    std::map<std::string, std::size_t> out;
    for (const auto& [s, c] : experiments::reference_attack_counts()) out[s] = c;
    return out;
  });

  m.def("command_names", &experiments::command_names);

  m.def("run_command", [](const std::string& name, const std::string& out, std::uint64_t seed,
                          const std::string& profile, const std::string& config_text,
                          const std::map<std::string, std::string>& overrides, unsigned threads) {
    experiments::RunContext ctx;
    ctx.config = experiments::Config::parse(config_text);
    for (const auto& [k, v] : overrides) ctx.config.set(k, v);
    ctx.seed = seed;
    ctx.profile = eval::parse_profile(profile);
    ctx.out = out;
    ctx.threads = threads;
    experiments::CommandResult r;
    {
      py::gil_scoped_release release;
      r = experiments::run_command(name, ctx);
    }
    py::dict d;
    d["command"] = r.command;
    d["fingerprint"] = r.fingerprint;
    std::vector<std::string> files;
    for (const auto& f : r.files) files.push_back(f.string());
    d["files"] = files;
    d["summary"] = r.summary;
    return d;
  }, py::arg("name"), py::arg("out"), py::arg("seed") = 0, py::arg("profile") = "desk",
     py::arg("config_text") = "", py::arg("overrides") = std::map<std::string, std::string>{},
     py::arg("threads") = 1);
}
