#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "aad/export.hpp"
#include "aad/pipeline.hpp"
#include "json.hpp"

using namespace aad;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("aadkit_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t line_count(const std::string& text) { return std::count(text.begin(), text.end(), '\n'); }

Session small_session(std::uint64_t seed, double snr = 5.0) {
  SynthConfig cfg;
  cfg.n_trials = 10;
  cfg.n_channels = 6;
  cfg.snr = snr;
  cfg.tasks = {1, 2};
  cfg.seed = seed;
  return synth_generate(cfg);
}

RunConfig small_config() {
  RunConfig c;
  c.model = ModelKind::Wf;
  c.protocol = Protocol::NestedLoto;
  c.window_s = 10.0;
  HyperGrid g;
  g.lambda = {1.0, 100.0};
  g.L = {6, 11};
  c.grid = g;
  c.n_folds = 5;
  return c;
}

std::string fingerprint(const MetricsReport& r) { return summary_json(r) + windows_csv(r) + time_pcc_csv(r); }

}  // namespace

TEST_CASE("pipeline runs are deterministic and thread-count independent") {
  const Session s = small_session(5);
  RunConfig c = small_config();
  const MetricsReport a = run_pipeline(s, c);
  const MetricsReport b = run_pipeline(s, c);
  CHECK(fingerprint(a) == fingerprint(b));
  c.jobs = 2;
  const MetricsReport j = run_pipeline(s, c);
  CHECK(fingerprint(j) == fingerprint(a));
  REQUIRE(a.folds.size() == j.folds.size());
  for (std::size_t f = 0; f < a.folds.size(); ++f) CHECK(a.folds[f].model_text == j.folds[f].model_text);

  CHECK(a.accuracy >= 0.9);
  CHECK(a.folds.size() == 5);
}

TEST_CASE("report invariants") {
  const Session s = small_session(6, 0.5);
  RunConfig c = small_config();
  c.window_s = 5.0;
  const MetricsReport r = run_pipeline(s, c);
  REQUIRE(!r.windows.empty());

  CHECK(r.delta_pcc1 == r.mean_pcc.attended - r.mean_pcc.unattended1);
  REQUIRE(r.delta_pcc2.has_value());
  CHECK(*r.delta_pcc2 == r.mean_pcc.attended - *r.mean_pcc.unattended2);
  double att = 0.0;
  for (const auto& w : r.windows) att += w.rhos[0];
  CHECK(r.mean_pcc.attended == doctest::Approx(att / r.windows.size()));

  // Window decisions agree with the classification metrics of (predicted, label).
  std::vector<int> pred, lab;
  std::size_t correct = 0;
  for (const auto& w : r.windows) {
    pred.push_back(w.predicted);
    lab.push_back(w.label);
    correct += w.correct;
    CHECK(w.correct == decide_window(w.rhos, 0).correct);
    CHECK(w.end_s - w.start_s == doctest::Approx(5.0));
  }
  CHECK(classification_metrics(pred, lab, 3).accuracy == doctest::Approx(r.pooled_accuracy));
  CHECK(static_cast<double>(correct) / r.windows.size() == doctest::Approx(r.pooled_accuracy));

  // Tracking curves: 30 one-second points per candidate speaker.
  CHECK(r.curves.size() == s.trials.size());
  for (const auto& curve : r.curves) {
    CHECK(curve.curve.pcc.size() == 3);
    CHECK(curve.curve.segments() == 30);
  }
  const std::string tp = time_pcc_csv(r);
  CHECK(line_count(tp) == 1 + s.trials.size() * 3 * 30);
}

TEST_CASE("fold tuning only sees its own training units") {
  const Session s = small_session(7);
  const RunConfig c = small_config();
  const CvPlan plan = make_plan(s, c);
  const LoopFit fit = fit_outer(s, plan, c, 0);
  const std::string before = serialize_model(fit.model);

  Session mutated = s;
  for (std::size_t u : plan.loops[0].test) {
    auto& trial = mutated.trials[plan.units[u].trial];
    for (double& v : trial.eeg.samples.data()) v = -3.0 * v + 1.0;
    for (auto& sp : trial.speakers)
      for (double& v : sp.envelope.samples) v *= 2.0;
  }
  const LoopFit again = fit_outer(mutated, plan, c, 0);
  CHECK(serialize_model(again.model) == before);
  CHECK(again.params == fit.params);
}

TEST_CASE("export") {
  const Session s = small_session(8);
  const MetricsReport r = run_pipeline(s, small_config());
  const fs::path dir = scratch("export");
  export_results(r, dir);
  for (const char* f : {"summary.json", "windows.csv", "time_pcc.csv", "channel_stats.csv"})
    CHECK(fs::exists(dir / f));
  CHECK(fs::exists(dir / "models" / "fold_00.txt"));

  const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(j["accuracy"]["mean"].get<double>() == r.accuracy);
  CHECK(j["macro_f1"]["mean"].get<double>() == r.macro_f1);
  CHECK(j["pooled_accuracy"].get<double>() == r.pooled_accuracy);
  CHECK(j["delta_pcc1"].get<double>() == r.delta_pcc1);
  CHECK(j["n_windows"].get<std::size_t>() == r.windows.size());
  CHECK(j["model"] == "wf");
  CHECK(j["protocol"] == "nested_loto");
  CHECK(j["folds"].size() == r.folds.size());
  CHECK(j["accuracy"]["mean"].get<double>() >= 0.9);

  const std::string windows = slurp(dir / "windows.csv");
  CHECK(line_count(windows) == r.windows.size() + 1);
  CHECK(windows.rfind("trial_id,fold,window,start_s,end_s,label,predicted,correct,tie,", 0) == 0);
  CHECK(line_count(slurp(dir / "channel_stats.csv")) == 1 + s.channel_names.size());

  std::map<std::string, std::string> first;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) first[e.path().string()] = slurp(e.path());
  export_results(r, dir);
  for (const auto& [path, body] : first) CHECK(slurp(path) == body);
}

TEST_CASE("channel ablation") {
  SynthConfig cfg;
  cfg.n_trials = 10;
  cfg.n_channels = 16;
  cfg.snr = 0.4;
  cfg.signal_channels = {0, 1, 2, 3};  // L1–L4
  cfg.tasks = {1};
  cfg.seed = 12;
  const Session s = synth_generate(cfg);
  RunConfig c = small_config();
  c.window_s = 5.0;

  std::vector<Layout> layouts;
  for (const char* name : {"full", "upper", "lower", "left", "right"}) layouts.push_back(named_layout(name, s.channel_names));
  CHECK(layouts[1].channels == std::vector<std::string>{"L1", "L2", "L3", "L4", "R1", "R2", "R3", "R4"});
  CHECK(layouts[3].channels.size() == 8);
  CHECK_THROWS_AS(named_layout("diagonal", s.channel_names), Error);

  const auto reports = run_channel_ablation(s, layouts, c);
  REQUIRE(reports.size() == 5);
  const MetricsReport plain = run_pipeline(s, c);
  CHECK(fingerprint(reports[0].report) == fingerprint(plain));
  for (const auto& lr : reports) {
    CHECK(lr.report.channels == lr.layout.channels);
    // Hyperparameters come from the full layout.
    for (std::size_t f = 0; f < lr.report.folds.size(); ++f) CHECK(lr.report.folds[f].params == plain.folds[f].params);
  }
  CHECK(reports[1].report.accuracy >= reports[2].report.accuracy);

  Layout bogus{"bogus", {"L1", "Z9"}};
  CHECK_THROWS_AS(run_channel_ablation(s, {bogus}, c), Error);
}

TEST_CASE("spatial classifiers on a direction-coded session") {
  SynthConfig cfg;
  cfg.n_trials = 30;
  cfg.n_channels = 8;
  cfg.snr = 1.0;
  cfg.direction_gain = 1.0;
  cfg.tasks = {1};
  cfg.seed = 13;
  const Session s = synth_generate(cfg);
  for (ModelKind m : {ModelKind::Csp, ModelKind::Rgc}) {
    RunConfig c;
    c.model = m;
    c.protocol = Protocol::NestedLoto;
    c.window_s = 10.0;
    c.n_folds = 5;
    HyperGrid g;
    g.lda_gamma = {1e-2};
    g.csp_f = {2};
    g.rgc_shrinkage = {0.1};
    c.grid = g;
    const MetricsReport r = run_pipeline(s, c);
    const auto [lo, hi] = binomial_interval(r.windows.size(), 1.0 / 3.0);
    CHECK(r.pooled_accuracy > hi);
    for (const auto& w : r.windows) CHECK(w.rhos.empty());
    CHECK(r.curves.empty());
  }
}

TEST_CASE("group runs") {
  const std::vector<Session> sessions{small_session(21), small_session(22)};
  RunConfig c = small_config();
  const GroupReport individual = run_pipeline_group(sessions, c, false);
  const GroupReport pooled = run_pipeline_group(sessions, c, true);
  REQUIRE(individual.subjects.size() == 2);
  REQUIRE(pooled.subjects.size() == 2);
  CHECK(individual.accuracy == doctest::Approx((individual.subjects[0].accuracy + individual.subjects[1].accuracy) / 2.0));
  // Group tuning picks one parameter set per outer loop for every subject.
  for (std::size_t f = 0; f < pooled.subjects[0].folds.size(); ++f)
    CHECK(pooled.subjects[0].folds[f].params == pooled.subjects[1].folds[f].params);
}
