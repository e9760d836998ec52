#include "aad/crossval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <tuple>

#include "json.hpp"

namespace aad {

namespace {

[[noreturn]] void bad_config(const std::string& what) { throw Error(ErrorCode::BadProtocolConfig, what); }

std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& excluded) {
  std::set<std::size_t> ex(excluded.begin(), excluded.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (!ex.count(i)) out.push_back(i);
  return out;
}

std::vector<std::size_t> concat_folds(const CvPlan& plan, const std::vector<std::size_t>& fold_ids) {
  std::vector<std::size_t> out;
  for (std::size_t f : fold_ids) out.insert(out.end(), plan.folds[f].begin(), plan.folds[f].end());
  std::sort(out.begin(), out.end());
  return out;
}

// Task-stratified assignment of the given trial indices to n folds.
std::vector<std::vector<std::size_t>> stratified(std::span<const TrialMeta> trials, std::vector<std::size_t> idx,
                                                 std::size_t n, std::mt19937_64& rng) {
  std::map<int, std::vector<std::size_t>> by_task;
  for (std::size_t i : idx) by_task[trials[i].task].push_back(i);
  std::vector<std::vector<std::size_t>> folds(n);
  std::size_t next = 0;
  for (auto& [task, members] : by_task) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i : members) folds[next++ % n].push_back(i);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

}  // namespace

Protocol parse_protocol(const std::string& name) {
  if (name == "within_trial") return Protocol::WithinTrial;
  if (name == "loto") return Protocol::Loto;
  if (name == "nested_loto") return Protocol::NestedLoto;
  if (name == "loso") return Protocol::Loso;
  if (name == "nested_loso") return Protocol::NestedLoso;
  throw Error(ErrorCode::BadConfig, "unknown protocol '" + name + "'");
}

ModelKind parse_model(const std::string& name) {
  if (name == "wf") return ModelKind::Wf;
  if (name == "cca") return ModelKind::Cca;
  if (name == "csp") return ModelKind::Csp;
  if (name == "rgc") return ModelKind::Rgc;
  throw Error(ErrorCode::BadConfig, "unknown model '" + name + "'");
}

const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::WithinTrial: return "within_trial";
    case Protocol::Loto: return "loto";
    case Protocol::NestedLoto: return "nested_loto";
    case Protocol::Loso: return "loso";
    case Protocol::NestedLoso: return "nested_loso";
  }
  return "?";
}

const char* to_string(ModelKind m) {
  switch (m) {
    case ModelKind::Wf: return "wf";
    case ModelKind::Cca: return "cca";
    case ModelKind::Csp: return "csp";
    case ModelKind::Rgc: return "rgc";
  }
  return "?";
}

bool is_nested(Protocol p) { return p == Protocol::NestedLoto || p == Protocol::NestedLoso; }
bool is_envelope_model(ModelKind m) { return m == ModelKind::Wf || m == ModelKind::Cca; }

CvPlan make_folds(std::span<const TrialMeta> trials, Protocol protocol, std::size_t n_folds, std::uint64_t seed) {
  if (trials.empty()) bad_config("no trials to split");
  if (n_folds < 2) bad_config("at least two folds are required");
  std::mt19937_64 rng(seed);
  CvPlan plan;
  plan.protocol = protocol;

  if (protocol == Protocol::WithinTrial) {
    if (n_folds < 3) bad_config("within_trial needs at least three folds (train, validation, test)");
    plan.folds.assign(n_folds, {});
    for (std::size_t t = 0; t < trials.size(); ++t) {
      const std::size_t len = trials[t].length;
      if (len < n_folds) bad_config("trial " + std::to_string(trials[t].id) + " is shorter than the fold count");
      std::vector<std::size_t> perm(n_folds);
      for (std::size_t k = 0; k < n_folds; ++k) perm[k] = k;
      std::shuffle(perm.begin(), perm.end(), rng);
      for (std::size_t k = 0; k < n_folds; ++k) {
        plan.folds[perm[k]].push_back(plan.units.size());
        plan.units.push_back({t, k * len / n_folds, (k + 1) * len / n_folds});
      }
    }
    for (std::size_t f = 0; f < n_folds; ++f) {
      OuterLoop loop;
      loop.test_fold = f;
      const std::size_t v = (f + 1) % n_folds;
      loop.test = concat_folds(plan, {f});
      std::vector<std::size_t> rest;
      for (std::size_t g = 0; g < n_folds; ++g)
        if (g != f && g != v) rest.push_back(g);
      InnerLoop inner{concat_folds(plan, rest), concat_folds(plan, {v})};
      // The final model trains on everything except the test fold.
      rest.push_back(v);
      loop.train = concat_folds(plan, rest);
      loop.inner.push_back(std::move(inner));
      plan.loops.push_back(std::move(loop));
    }
    validate_plan(plan);
    return plan;
  }

  for (std::size_t t = 0; t < trials.size(); ++t) plan.units.push_back({t, 0, trials[t].length});

  if (protocol == Protocol::Loto || protocol == Protocol::NestedLoto) {
    if (n_folds > trials.size()) bad_config("more folds than trials");
    std::vector<std::size_t> all(trials.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    plan.folds = stratified(trials, all, n_folds, rng);
    for (std::size_t f = 0; f < n_folds; ++f) {
      OuterLoop loop;
      loop.test_fold = f;
      loop.test = plan.folds[f];
      std::vector<std::size_t> others;
      for (std::size_t g = 0; g < n_folds; ++g)
        if (g != f) others.push_back(g);
      loop.train = concat_folds(plan, others);
      if (protocol == Protocol::NestedLoto) {
        for (std::size_t g : others) {
          std::vector<std::size_t> inner_train;
          for (std::size_t h : others)
            if (h != g) inner_train.push_back(h);
          loop.inner.push_back({concat_folds(plan, inner_train), plan.folds[g]});
        }
      }
      plan.loops.push_back(std::move(loop));
    }
    validate_plan(plan);
    return plan;
  }

  // Speaker split.
  std::vector<std::size_t> group_a, group_b;
  for (std::size_t t = 0; t < trials.size(); ++t) {
    if (trials[t].speaker_group == 0) group_a.push_back(t);
    else if (trials[t].speaker_group == 1) group_b.push_back(t);
    else bad_config("trial " + std::to_string(trials[t].id) + " has no speaker group");
  }
  if (group_a.empty() || group_b.empty()) bad_config("loso needs trials from both speaker groups");
  const std::size_t kb = std::min(n_folds, group_b.size());
  const bool nested = protocol == Protocol::NestedLoso;
  if (nested && kb < 2) bad_config("nested_loso needs at least two group-B folds");
  auto b_folds = stratified(trials, group_b, kb, rng);
  plan.folds.push_back(group_a);
  for (auto& f : b_folds) plan.folds.push_back(std::move(f));
  for (std::size_t f = 1; f <= kb; ++f) {
    OuterLoop loop;
    loop.test_fold = f;
    loop.test = plan.folds[f];
    loop.train = plan.folds[0];
    if (nested)
      for (std::size_t g = 1; g <= kb; ++g)
        if (g != f) loop.inner.push_back({plan.folds[0], plan.folds[g]});
    plan.loops.push_back(std::move(loop));
  }
  validate_plan(plan);
  return plan;
}

void validate_plan(const CvPlan& plan) {
  const std::size_t n = plan.units.size();
  std::vector<int> owner(n, -1);
  for (std::size_t f = 0; f < plan.folds.size(); ++f)
    for (std::size_t u : plan.folds[f]) {
      if (u >= n) bad_config("fold references an unknown unit");
      if (owner[u] >= 0) bad_config("folds overlap");
      owner[u] = static_cast<int>(f);
    }
  if (std::find(owner.begin(), owner.end(), -1) != owner.end()) bad_config("folds do not cover every unit");

  auto disjoint = [](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::set<std::size_t> sa(a.begin(), a.end());
    return std::none_of(b.begin(), b.end(), [&](std::size_t x) { return sa.count(x) > 0; });
  };
  for (const auto& loop : plan.loops) {
    if (loop.test.empty() || loop.train.empty()) bad_config("empty train or test set");
    if (!disjoint(loop.train, loop.test)) bad_config("train and test overlap");
    for (const auto& in : loop.inner) {
      if (in.train.empty() || in.validation.empty()) bad_config("empty inner train or validation set");
      if (!disjoint(in.train, loop.test) || !disjoint(in.validation, loop.test))
        bad_config("inner loop touches the test fold");
      if (!disjoint(in.train, in.validation)) bad_config("inner train and validation overlap");
    }
  }
}

std::string describe(const ParamSet& p, ModelKind model) {
  char buf[160];
  switch (model) {
    case ModelKind::Wf: std::snprintf(buf, sizeof buf, "lambda=%g L=%zu", p.lambda, p.L); break;
    case ModelKind::Cca:
      std::snprintf(buf, sizeof buf, "reg=%g L=%zu Ly=%zu k=%zu", p.reg, p.L, p.Ly, p.n_components);
      break;
    case ModelKind::Csp: std::snprintf(buf, sizeof buf, "F=%zu gamma=%g", p.csp_f, p.lda_gamma); break;
    case ModelKind::Rgc: std::snprintf(buf, sizeof buf, "shrinkage=%g gamma=%g", p.rgc_shrinkage, p.lda_gamma); break;
  }
  return buf;
}

HyperGrid default_grid(ModelKind model) {
  HyperGrid g;
  ParamSet d;
  g.lambda = {d.lambda};
  g.L = {d.L};
  g.Ly = {d.Ly};
  g.n_components = {d.n_components};
  g.reg = {d.reg};
  g.csp_f = {d.csp_f};
  g.rgc_shrinkage = {d.rgc_shrinkage};
  g.lda_gamma = {d.lda_gamma};
  switch (model) {
    case ModelKind::Wf:
      g.lambda.clear();
      for (int e = -6; e <= 3; ++e) g.lambda.push_back(std::pow(10.0, e));
      g.L = {6, 11, 21};
      break;
    case ModelKind::Cca:
      g.reg = {1e-3, 1.0, 1e3};
      g.L = {6, 11, 21};
      break;
    case ModelKind::Csp: g.lda_gamma = {1e-3, 1e-1}; break;
    case ModelKind::Rgc: g.rgc_shrinkage = {0.01, 0.1}; break;
  }
  return g;
}

HyperGrid grid_from_json(const std::string& text, ModelKind model) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("grid is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::BadConfig, "grid must be a JSON object");
  HyperGrid g = default_grid(model);
  auto load = [&](const char* key, auto& dst) {
    if (!j.contains(key)) return;
    try {
      dst = j.at(key).get<std::remove_reference_t<decltype(dst)>>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::BadConfig, std::string("grid field '") + key + "' has the wrong type");
    }
    if (dst.empty()) throw Error(ErrorCode::EmptyGrid, std::string("grid field '") + key + "' is empty");
  };
  static const std::set<std::string> known = {"lambda", "L", "L_y", "n_components", "reg", "csp_f",
                                              "rgc_shrinkage", "lda_gamma", "budget", "seed"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw Error(ErrorCode::BadConfig, "unknown grid field '" + key + "'");
  load("lambda", g.lambda);
  load("L", g.L);
  load("L_y", g.Ly);
  load("n_components", g.n_components);
  load("reg", g.reg);
  load("csp_f", g.csp_f);
  load("rgc_shrinkage", g.rgc_shrinkage);
  load("lda_gamma", g.lda_gamma);
  try {
    if (j.contains("budget")) g.budget = j.at("budget").get<std::size_t>();
    if (j.contains("seed")) g.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::BadConfig, "grid fields 'budget' and 'seed' must be integers");
  }
  return g;
}

std::vector<ParamSet> expand_grid(const HyperGrid& g, ModelKind model) {
  auto need = [](bool empty, const char* name) {
    if (empty) throw Error(ErrorCode::EmptyGrid, std::string("no values for '") + name + "'");
  };
  std::vector<ParamSet> out;
  ParamSet base;
  switch (model) {
    case ModelKind::Wf:
      need(g.lambda.empty(), "lambda");
      need(g.L.empty(), "L");
      for (double lambda : g.lambda)
        for (std::size_t L : g.L) {
          ParamSet p = base;
          p.lambda = lambda;
          p.L = L;
          out.push_back(p);
        }
      break;
    case ModelKind::Cca:
      need(g.reg.empty(), "reg");
      need(g.L.empty(), "L");
      need(g.Ly.empty(), "L_y");
      need(g.n_components.empty(), "n_components");
      for (double reg : g.reg)
        for (std::size_t L : g.L)
          for (std::size_t Ly : g.Ly)
            for (std::size_t k : g.n_components) {
              ParamSet p = base;
              p.reg = reg;
              p.L = L;
              p.Ly = Ly;
              p.n_components = k;
              out.push_back(p);
            }
      break;
    case ModelKind::Csp:
      need(g.csp_f.empty(), "csp_f");
      need(g.lda_gamma.empty(), "lda_gamma");
      for (double gamma : g.lda_gamma)
        for (std::size_t f : g.csp_f) {
          ParamSet p = base;
          p.csp_f = f;
          p.lda_gamma = gamma;
          out.push_back(p);
        }
      break;
    case ModelKind::Rgc:
      need(g.rgc_shrinkage.empty(), "rgc_shrinkage");
      need(g.lda_gamma.empty(), "lda_gamma");
      for (double gamma : g.lda_gamma)
        for (double a : g.rgc_shrinkage) {
          ParamSet p = base;
          p.rgc_shrinkage = a;
          p.lda_gamma = gamma;
          out.push_back(p);
        }
      break;
  }
  auto key = [](const ParamSet& p) {
    return std::make_tuple(p.lambda, p.reg, p.L, p.Ly, p.n_components, p.lda_gamma, p.csp_f, p.rgc_shrinkage);
  };
  std::sort(out.begin(), out.end(), [&](const ParamSet& a, const ParamSet& b) { return key(a) < key(b); });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (g.budget > 0 && g.budget < out.size()) {
    std::mt19937_64 rng(g.seed);
    std::vector<std::size_t> idx(out.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(g.budget);
    std::sort(idx.begin(), idx.end());
    std::vector<ParamSet> subset;
    for (std::size_t i : idx) subset.push_back(out[i]);
    out = std::move(subset);
  }
  return out;
}

SearchResult search_hyperparams(std::span<const InnerLoop> loops, std::span<const ParamSet> candidates,
                                const Objective& objective) {
  if (candidates.empty()) throw Error(ErrorCode::EmptyGrid, "no hyperparameter candidates");
  if (loops.empty()) throw Error(ErrorCode::BadProtocolConfig, "no validation loops to tune on");
  SearchResult r;
  r.best_score = -std::numeric_limits<double>::infinity();
  r.best = candidates.front();
  for (const auto& p : candidates) {
    double total = 0.0;
    std::size_t counted = 0;
    bool failed = false;
    for (const auto& loop : loops) {
      double s;
      try {
        s = objective(p, loop.train, loop.validation);
      } catch (const Error& e) {
        if (category_of(e.code()) != ErrorCategory::Numerical) throw;
        failed = true;
        break;
      }
      if (std::isnan(s)) continue;
      total += s;
      ++counted;
    }
    const double score = failed || counted == 0 ? -std::numeric_limits<double>::infinity() : total / counted;
    r.scores.push_back(score);
    if (score > r.best_score) {
      r.best_score = score;
      r.best = p;
    }
  }
  return r;
}

std::vector<InnerLoop> tuning_loops(const OuterLoop& loop) {
  if (!loop.inner.empty()) return loop.inner;
  return {InnerLoop{loop.train, loop.test}};
}

std::vector<SearchResult> search_hyperparams(const CvPlan& plan, const HyperGrid& grid, ModelKind model,
                                             const Objective& objective) {
  const auto candidates = expand_grid(grid, model);
  std::vector<SearchResult> out;
  for (const auto& loop : plan.loops) {
    const auto loops = tuning_loops(loop);
    out.push_back(search_hyperparams(loops, candidates, objective));
  }
  return out;
}

}  // namespace aad
