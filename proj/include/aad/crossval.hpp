#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aad/error.hpp"

namespace aad {

enum class Protocol { WithinTrial, Loto, NestedLoto, Loso, NestedLoso };
enum class ModelKind { Wf, Cca, Csp, Rgc };

Protocol parse_protocol(const std::string& name);
ModelKind parse_model(const std::string& name);
const char* to_string(Protocol p);
const char* to_string(ModelKind m);
bool is_nested(Protocol p);
bool is_envelope_model(ModelKind m);

struct TrialMeta {
  int id = 0;
  int task = 1;
  int speaker_group = 0;  // 0: speakers 1–3, 1: speakers 4–6
  std::size_t length = 0;  // samples
};

// A contiguous stretch [begin, end) of one trial's samples.
struct CvUnit {
  std::size_t trial = 0;  // index into the trial list
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct InnerLoop {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

struct OuterLoop {
  std::size_t test_fold = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<InnerLoop> inner;  // empty → hyperparameters tuned on the test fold
};

struct CvPlan {
  Protocol protocol = Protocol::NestedLoto;
  std::vector<CvUnit> units;
  std::vector<std::vector<std::size_t>> folds;  // unit indices
  std::vector<OuterLoop> loops;
};

// within_trial: every trial is cut into n_folds contiguous segments and a
// seeded permutation sends one segment of each trial to each fold; loop f
// tests fold f and validates on fold (f+1) mod n_folds.
// loto / nested_loto: trial-level folds, task-stratified round-robin after a
// seeded per-task shuffle.
// loso / nested_loso: group-0 trials train only; group-1 trials form the
// validation and test folds.
CvPlan make_folds(std::span<const TrialMeta> trials, Protocol protocol, std::size_t n_folds, std::uint64_t seed);

// Partition and separation checks; throws BadProtocolConfig.
void validate_plan(const CvPlan& plan);

struct ParamSet {
  double lambda = 1.0;
  std::size_t L = 11;
  std::size_t Ly = 4;
  std::size_t n_components = 2;
  double reg = 1.0;
  std::size_t csp_f = 4;
  double rgc_shrinkage = 0.1;
  double lda_gamma = 1e-3;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

std::string describe(const ParamSet& p, ModelKind model);

struct HyperGrid {
  std::vector<double> lambda;
  std::vector<std::size_t> L;
  std::vector<std::size_t> Ly;
  std::vector<std::size_t> n_components;
  std::vector<double> reg;
  std::vector<std::size_t> csp_f;
  std::vector<double> rgc_shrinkage;
  std::vector<double> lda_gamma;
  std::size_t budget = 0;  // 0 → exhaustive
  std::uint64_t seed = 1;
};

HyperGrid default_grid(ModelKind model);
// Fields missing from the JSON keep their defaults; listed fields must be nonempty.
HyperGrid grid_from_json(const std::string& text, ModelKind model);

// Candidate list in preference order (ascending λ or reg, then L, then the rest).
// A nonzero budget keeps a seeded random subset.
std::vector<ParamSet> expand_grid(const HyperGrid& grid, ModelKind model);

// objective(params, train_units, eval_units) → validation accuracy.
using Objective =
    std::function<double(const ParamSet&, std::span<const std::size_t>, std::span<const std::size_t>)>;

struct SearchResult {
  ParamSet best;
  double best_score = 0.0;
  std::vector<double> scores;  // per candidate, mean over validation loops
};

// Numerical failures of a candidate score −inf. Earliest maximum wins.
SearchResult search_hyperparams(std::span<const InnerLoop> loops, std::span<const ParamSet> candidates,
                                const Objective& objective);

// Per outer loop: inner loops when present, otherwise the test fold.
std::vector<SearchResult> search_hyperparams(const CvPlan& plan, const HyperGrid& grid, ModelKind model,
                                             const Objective& objective);

// Validation loops used for tuning one outer loop.
std::vector<InnerLoop> tuning_loops(const OuterLoop& loop);

}  // namespace aad
