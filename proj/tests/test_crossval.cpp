#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "aad/crossval.hpp"

using namespace aad;

namespace {

std::vector<TrialMeta> trials(std::size_t n, std::size_t length = 1200) {
  std::vector<TrialMeta> t;
  for (std::size_t i = 0; i < n; ++i)
    t.push_back({static_cast<int>(i + 1), static_cast<int>(i % 7) + 1, i % 3 == 2 ? 1 : 0, length});
  return t;
}

std::set<std::size_t> trials_of(const CvPlan& plan, const std::vector<std::size_t>& units) {
  std::set<std::size_t> out;
  for (std::size_t u : units) out.insert(plan.units[u].trial);
  return out;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("nested leave-one-trial-out layout") {
  const auto meta = trials(63);
  const CvPlan plan = make_folds(meta, Protocol::NestedLoto, 9, 1);
  REQUIRE(plan.loops.size() == 9);
  for (const auto& loop : plan.loops) CHECK(loop.inner.size() == 8);

  // Folds partition the units.
  std::vector<int> seen(plan.units.size(), 0);
  for (const auto& f : plan.folds) {
    CHECK(f.size() == 7);
    for (std::size_t u : f) ++seen[u];
  }
  for (int s : seen) CHECK(s == 1);

  for (const auto& loop : plan.loops) {
    const std::set<std::size_t> test(loop.test.begin(), loop.test.end());
    CHECK(loop.test == plan.folds[loop.test_fold]);
    for (std::size_t u : loop.train) CHECK(test.count(u) == 0);
    CHECK(loop.train.size() + loop.test.size() == plan.units.size());
    for (const auto& inner : loop.inner) {
      for (std::size_t u : inner.train) CHECK(test.count(u) == 0);
      for (std::size_t u : inner.validation) CHECK(test.count(u) == 0);
      std::set<std::size_t> tr(inner.train.begin(), inner.train.end());
      for (std::size_t u : inner.validation) CHECK(tr.count(u) == 0);
    }
  }
  CHECK_NOTHROW(validate_plan(plan));

  // Each task is spread evenly: every fold holds one trial of each task.
  for (const auto& f : plan.folds) {
    std::set<int> tasks;
    for (std::size_t u : f) tasks.insert(meta[plan.units[u].trial].task);
    CHECK(tasks.size() == 7);
  }

  const CvPlan again = make_folds(meta, Protocol::NestedLoto, 9, 1);
  CHECK(again.folds == plan.folds);
  CHECK(make_folds(meta, Protocol::NestedLoto, 9, 2).folds != plan.folds);
}

TEST_CASE("plain leave-one-trial-out tunes on the test fold") {
  const CvPlan plan = make_folds(trials(20), Protocol::Loto, 5, 1);
  REQUIRE(plan.loops.size() == 5);
  for (const auto& loop : plan.loops) {
    CHECK(loop.inner.empty());
    const auto t = tuning_loops(loop);
    REQUIRE(t.size() == 1);
    CHECK(t[0].validation == loop.test);
    CHECK(t[0].train == loop.train);
  }
}

TEST_CASE("leave-one-speaker-out keeps group B out of training") {
  const auto meta = trials(63);
  for (Protocol p : {Protocol::Loso, Protocol::NestedLoso}) {
    const CvPlan plan = make_folds(meta, p, 9, 3);
    CHECK_NOTHROW(validate_plan(plan));
    for (const auto& loop : plan.loops) {
      for (std::size_t t : trials_of(plan, loop.test)) CHECK(meta[t].speaker_group == 1);
      for (std::size_t t : trials_of(plan, loop.train)) CHECK(meta[t].speaker_group == 0);
      for (const auto& inner : tuning_loops(loop)) {
        for (std::size_t t : trials_of(plan, inner.train)) CHECK(meta[t].speaker_group == 0);
        for (std::size_t t : trials_of(plan, inner.validation)) CHECK(meta[t].speaker_group == 1);
      }
    }
  }
  std::vector<TrialMeta> one_group = trials(9);
  for (auto& m : one_group) m.speaker_group = 0;
  CHECK(code_of([&] { make_folds(one_group, Protocol::Loso, 3, 1); }) == ErrorCode::BadProtocolConfig);
}

TEST_CASE("within-trial segmentation") {
  const auto meta = trials(6, 1000);
  const CvPlan plan = make_folds(meta, Protocol::WithinTrial, 5, 4);
  REQUIRE(plan.folds.size() == 5);
  CHECK(plan.units.size() == 30);
  // Every fold takes one segment of each trial; segments tile each trial.
  for (const auto& f : plan.folds) CHECK(trials_of(plan, f).size() == 6);
  for (std::size_t t = 0; t < 6; ++t) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    for (const auto& u : plan.units)
      if (u.trial == t) spans.emplace_back(u.begin, u.end);
    std::sort(spans.begin(), spans.end());
    CHECK(spans.front().first == 0);
    CHECK(spans.back().second == 1000);
    for (std::size_t i = 1; i < spans.size(); ++i) CHECK(spans[i].first == spans[i - 1].second);
  }
  for (std::size_t f = 0; f < 5; ++f) {
    const auto& loop = plan.loops[f];
    REQUIRE(loop.inner.size() == 1);
    CHECK(loop.inner[0].validation == plan.folds[(f + 1) % 5]);
  }
  CHECK(code_of([&] { make_folds(meta, Protocol::WithinTrial, 1, 4); }) == ErrorCode::BadProtocolConfig);
}

TEST_CASE("protocol and model names") {
  CHECK(parse_protocol("nested_loto") == Protocol::NestedLoto);
  CHECK(std::string(to_string(Protocol::WithinTrial)) == "within_trial");
  CHECK(parse_model("rgc") == ModelKind::Rgc);
  CHECK(code_of([] { parse_model("svm"); }) == ErrorCode::BadConfig);
  CHECK(code_of([] { parse_protocol("kfold"); }) == ErrorCode::BadConfig);
  CHECK(is_nested(Protocol::NestedLoso));
  CHECK_FALSE(is_envelope_model(ModelKind::Csp));
}

TEST_CASE("grids") {
  const auto wf = expand_grid(default_grid(ModelKind::Wf), ModelKind::Wf);
  CHECK(wf.size() == 30);
  for (std::size_t i = 1; i < wf.size(); ++i) {
    const bool ordered = wf[i - 1].lambda < wf[i].lambda || (wf[i - 1].lambda == wf[i].lambda && wf[i - 1].L < wf[i].L);
    CHECK(ordered);
  }

  const HyperGrid g = grid_from_json(R"({"lambda": [0.5], "L": [7]})", ModelKind::Wf);
  const auto one = expand_grid(g, ModelKind::Wf);
  REQUIRE(one.size() == 1);
  CHECK(one[0].lambda == 0.5);
  CHECK(one[0].L == 7);

  CHECK(code_of([] { grid_from_json(R"({"lambda": []})", ModelKind::Wf); }) == ErrorCode::EmptyGrid);
  CHECK(code_of([] { grid_from_json(R"({"gamma": [1]})", ModelKind::Wf); }) == ErrorCode::BadConfig);

  HyperGrid budgeted = default_grid(ModelKind::Wf);
  budgeted.budget = 5;
  const auto sub = expand_grid(budgeted, ModelKind::Wf);
  CHECK(sub.size() == 5);
  CHECK(expand_grid(budgeted, ModelKind::Wf) == sub);
}

TEST_CASE("hyperparameter search") {
  const std::vector<InnerLoop> loops{{{0, 1}, {2}}, {{0, 2}, {1}}};
  std::vector<ParamSet> one(1);
  one[0].lambda = 3.0;
  const SearchResult r1 = search_hyperparams(loops, one, [](auto&&...) { return 0.1; });
  CHECK(r1.best == one[0]);

  // Planted optimum at λ = 10, L = 11.
  const auto cands = expand_grid(default_grid(ModelKind::Wf), ModelKind::Wf);
  const SearchResult planted = search_hyperparams(loops, cands, [](const ParamSet& p, auto, auto) {
    return -std::abs(std::log10(p.lambda) - 1.0) - std::abs(static_cast<double>(p.L) - 11.0) / 100.0;
  });
  CHECK(planted.best.lambda == doctest::Approx(10.0));
  CHECK(planted.best.L == 11);
  CHECK(planted.scores.size() == cands.size());

  // Equal scores keep the earliest (smallest λ) candidate.
  const SearchResult flat = search_hyperparams(loops, cands, [](auto&&...) { return 0.5; });
  CHECK(flat.best == cands.front());

  // Numerical failures rank below everything; configuration errors propagate.
  const SearchResult failing = search_hyperparams(loops, cands, [](const ParamSet& p, auto, auto) -> double {
    if (p.lambda < 1.0) throw Error(ErrorCode::SingularSystem, "planted");
    return 0.2;
  });
  CHECK(failing.best.lambda == doctest::Approx(1.0));
  CHECK(failing.scores.front() == -std::numeric_limits<double>::infinity());
  CHECK(code_of([&] {
          search_hyperparams(loops, cands, [](auto&&...) -> double { throw Error(ErrorCode::BadConfig, "x"); });
        }) == ErrorCode::BadConfig);

  // The objective never sees a unit of the loop's test fold.
  const CvPlan plan = make_folds(trials(63), Protocol::NestedLoto, 9, 1);
  HyperGrid small;
  small.lambda = {0.1, 10.0};
  small.L = {6};
  const std::size_t per_loop_calls = 2 * 8;
  std::size_t calls = 0, leaks = 0;
  const auto per_loop = search_hyperparams(
      plan, small, ModelKind::Wf,
      [&](const ParamSet&, std::span<const std::size_t> tr, std::span<const std::size_t> va) {
        const auto& test = plan.loops[calls++ / per_loop_calls].test;
        for (std::size_t u : tr) leaks += std::count(test.begin(), test.end(), u);
        for (std::size_t u : va) leaks += std::count(test.begin(), test.end(), u);
        return 0.0;
      });
  CHECK(per_loop.size() == 9);
  CHECK(calls == 9 * per_loop_calls);
  CHECK(leaks == 0);

  CHECK(code_of([&] { search_hyperparams(loops, std::vector<ParamSet>{}, [](auto&&...) { return 0.0; }); }) ==
        ErrorCode::EmptyGrid);
}
