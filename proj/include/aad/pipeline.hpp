#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "aad/crossval.hpp"
#include "aad/linear_decoders.hpp"
#include "aad/metrics.hpp"
#include "aad/session.hpp"
#include "aad/spatial_decoders.hpp"

namespace aad {

struct RunConfig {
  ModelKind model = ModelKind::Wf;
  Protocol protocol = Protocol::NestedLoto;
  double window_s = 30.0;
  std::optional<double> tune_window_s;  // defaults to window_s
  std::optional<HyperGrid> grid;        // defaults to default_grid(model)
  std::uint64_t seed = 1;
  std::size_t n_folds = 0;              // 0 → 5 for within_trial, otherwise min(9, trials)
  std::vector<std::string> channels;    // empty → every channel
  // Skips tuning: one entry for every outer loop, or one per loop.
  std::vector<ParamSet> fixed_params;
  double track_seg_s = 1.0;
  std::size_t jobs = 1;
  CspOptions csp;
};

struct CspClassifier {
  CspModel csp;
  LdaModel lda;
};

struct RgcClassifier {
  RgcModel rgc;
  LdaModel lda;
};

using FittedModel = std::variant<WfModel, CcaModel, CspClassifier, RgcClassifier>;

// Text form with hexadecimal floats; equal strings ⇔ bit-identical models.
std::string serialize_model(const FittedModel& model);

struct WindowRecord {
  int trial_id = 0;
  std::size_t fold = 0;
  std::size_t index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  int label = -1;      // speaker slot (envelope models) or direction class
  int predicted = -1;  // −1 on a tie
  bool correct = false;
  bool tie = false;
  Vector rhos;         // attended, unattended₁, [unattended₂]; empty for classifiers
};

struct TrialCurve {
  int trial_id = 0;
  std::size_t fold = 0;
  double start_s = 0.0;             // unit offset inside the trial
  std::vector<int> speaker_ids;     // one per curve, slot order
  TimePccCurve curve;
  std::optional<double> switch_s;   // trial time of a speaker-to-speaker switch
  std::optional<double> crossover_s;
};

struct FoldResult {
  std::size_t fold = 0;
  ParamSet params;
  double validation_score = 0.0;  // NaN when hyperparameters were fixed
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::size_t n_windows = 0;
  std::string model_text;
};

struct MetricsReport {
  ModelKind model = ModelKind::Wf;
  Protocol protocol = Protocol::NestedLoto;
  double window_s = 0.0;
  std::vector<std::string> channels;
  std::vector<FoldResult> folds;
  std::vector<WindowRecord> windows;
  // Mean ± std over folds that produced windows.
  double accuracy = 0.0;
  double accuracy_std = 0.0;
  double macro_f1 = 0.0;
  double macro_f1_std = 0.0;
  // Over all test windows at once.
  double pooled_accuracy = 0.0;
  double pooled_macro_f1 = 0.0;
  PccTriple mean_pcc;
  double delta_pcc1 = 0.0;
  std::optional<double> delta_pcc2;
  std::vector<TrialCurve> curves;
  ChannelWeightStats channel_stats;
};

CvPlan make_plan(const Session& session, const RunConfig& config);

struct LoopFit {
  FittedModel model;
  ParamSet params;
  double validation_score = 0.0;
};

// Tunes (unless fixed) and fits the model of one outer loop, reading only
// the loop's training and validation units.
LoopFit fit_outer(const Session& session, const CvPlan& plan, const RunConfig& config, std::size_t loop);

MetricsReport run_pipeline(const Session& session, const RunConfig& config);
MetricsReport run_pipeline(const Session& session, const CvPlan& plan, const RunConfig& config);

struct GroupReport {
  std::vector<MetricsReport> subjects;
  double accuracy = 0.0;  // mean over subjects of their fold means
  double accuracy_std = 0.0;
  double macro_f1 = 0.0;
  double macro_f1_std = 0.0;
};

// group_tuning: each outer loop picks the candidate with the best
// unweighted mean validation accuracy across subjects.
GroupReport run_pipeline_group(const std::vector<Session>& sessions, const RunConfig& config, bool group_tuning);

struct Layout {
  std::string name;
  std::vector<std::string> channels;
};

// full, left, right, upper, lower on the L1–L8 / R1–R8 montage.
Layout named_layout(const std::string& name, const std::vector<std::string>& session_channels);

struct LayoutReport {
  Layout layout;
  MetricsReport report;
};

// Hyperparameters are fixed per outer loop to the full-layout selection.
std::vector<LayoutReport> run_channel_ablation(const Session& session, const std::vector<Layout>& layouts,
                                               const RunConfig& config);

}  // namespace aad
