#include "aad/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <set>

namespace aad {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Serialization

void put(std::string& out, const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  out += buf;
}

void put_vector(std::string& out, const char* name, std::span<const double> v) {
  out += name;
  for (double x : v) put(out, " %a", x);
  out += '\n';
}

void put_matrix(std::string& out, const char* name, const Matrix& m) {
  out += name;
  out += ' ' + std::to_string(m.rows()) + 'x' + std::to_string(m.cols());
  for (double x : m.data()) put(out, " %a", x);
  out += '\n';
}

void put_lda(std::string& out, const LdaModel& lda) {
  put(out, "lda gamma=%a\n", lda.gamma);
  put_matrix(out, "class_means", lda.class_means);
  put_matrix(out, "weights", lda.weights);
  put_vector(out, "bias", lda.bias);
  put_vector(out, "priors", lda.priors);
}

// ---------------------------------------------------------------------------
// Per-unit data

struct UnitData {
  int trial_id = 0;
  double fs = 0.0;
  double start_s = 0.0;
  Matrix eeg;                     // z-scored, channel subset
  std::vector<Vector> speakers;   // z-scored envelopes, slot order
  std::vector<int> speaker_ids;
  AttendedStreams streams;
  std::optional<double> switch_s;  // relative to the unit start
  std::size_t switch_from = 0, switch_to = 0;
};

struct Window {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t index = 0;
};

// Non-overlapping windows whose attended label is defined at every sample.
std::vector<Window> windows_of(const UnitData& u, std::size_t w) {
  std::vector<Window> out;
  const std::size_t n = u.eeg.rows();
  for (std::size_t k = 0; (k + 1) * w <= n; ++k) {
    const std::size_t b = k * w, e = b + w;
    bool ok = true;
    for (std::size_t t = b; t < e && ok; ++t) ok = u.streams.defined[t];
    if (ok) out.push_back({b, e, k});
  }
  return out;
}

Matrix rows_of(const Matrix& m, std::size_t b, std::size_t e) {
  Matrix out(e - b, m.cols());
  std::copy(m.data().begin() + static_cast<std::ptrdiff_t>(b * m.cols()),
            m.data().begin() + static_cast<std::ptrdiff_t>(e * m.cols()), out.data().begin());
  return out;
}

// y(t) = Σ_c Σ_l w[c·L + l] · x(t − l, c), the product of the lagged design with w.
Vector lagged_apply(const Matrix& x, std::span<const double> w, std::size_t lags) {
  const std::size_t n = x.rows(), C = x.cols();
  Vector y(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double* wc = w.data() + c * lags;
      for (std::size_t l = 0; l < lags && l <= t; ++l) acc += wc[l] * x(t - l, c);
    }
    y[t] = acc;
  }
  return y;
}

Vector lagged_apply(std::span<const double> x, std::span<const double> w) {
  Vector y(x.size(), 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double acc = 0.0;
    for (std::size_t l = 0; l < w.size() && l <= t; ++l) acc += w[l] * x[t - l];
    y[t] = acc;
  }
  return y;
}

double accuracy_of(const std::vector<WindowRecord>& w) {
  if (w.empty()) return kNaN;
  std::size_t ok = 0;
  for (const auto& r : w) ok += r.correct ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(w.size());
}

double f1_of(const std::vector<WindowRecord>& w) {
  if (w.empty()) return kNaN;
  std::vector<int> pred, lab;
  for (const auto& r : w) {
    pred.push_back(r.predicted);
    lab.push_back(r.label);
  }
  return classification_metrics(pred, lab, 3).macro_f1;
}

using TrainKey = std::tuple<std::vector<std::size_t>, std::size_t, std::size_t>;

std::vector<std::size_t> resolve_channels(const Session& s, const std::vector<std::string>& names) {
  std::vector<std::size_t> idx;
  if (names.empty()) {
    for (std::size_t c = 0; c < s.channel_names.size(); ++c) idx.push_back(c);
    return idx;
  }
  std::set<std::size_t> seen;
  for (const auto& n : names) {
    auto it = std::find(s.channel_names.begin(), s.channel_names.end(), n);
    if (it == s.channel_names.end()) throw Error(ErrorCode::BadChannelIndex, "unknown channel '" + n + "'");
    const auto c = static_cast<std::size_t>(it - s.channel_names.begin());
    if (!seen.insert(c).second) throw Error(ErrorCode::BadChannelIndex, "channel '" + n + "' listed twice");
    idx.push_back(c);
  }
  return idx;
}

std::size_t window_samples(double window_s, double fs) {
  if (!(window_s > 0.0)) throw Error(ErrorCode::BadConfig, "window length must be positive");
  const auto w = static_cast<std::size_t>(std::llround(window_s * fs));
  if (w < 2) throw Error(ErrorCode::BadConfig, "window must span at least two samples");
  return w;
}

// Lazily built unit data plus caches of summed statistics. Units are only
// materialized when a fit or an evaluation asks for them.
class Context {
 public:
  Context(const Session& s, const CvPlan& plan, const RunConfig& cfg)
      : session_(s), plan_(plan), cfg_(cfg), channels_(resolve_channels(s, cfg.channels)),
        built_(plan.units.size()), flags_(new std::once_flag[plan.units.size()]) {
    if (s.trials.empty()) throw Error(ErrorCode::ManifestError, "session has no trials");
    fs_ = s.trials.front().eeg.fs;
    for (const auto& t : s.trials)
      if (std::abs(t.eeg.fs - fs_) > 1e-9) throw Error(ErrorCode::ShapeMismatch, "trials differ in sample rate");
  }

  double fs() const { return fs_; }
  const RunConfig& config() const { return cfg_; }

  const UnitData& unit(std::size_t u) {
    std::call_once(flags_[u], [&] { built_[u] = std::make_unique<UnitData>(build(u)); });
    return *built_[u];
  }

  // Ly == 0: vector target; otherwise lagged target blocks.
  std::shared_ptr<const CovStats> train_stats(std::span<const std::size_t> train, std::size_t L, std::size_t Ly) {
    TrainKey key{std::vector<std::size_t>(train.begin(), train.end()), L, Ly};
    {
      std::lock_guard lock(mu_);
      auto it = sums_.find(key);
      if (it != sums_.end()) return it->second;
    }
    std::optional<CovStats> total;
    for (std::size_t u : train) {
      auto s = unit_stats(u, L, Ly);
      if (!total) total = *s;
      else *total += *s;
    }
    auto out = std::make_shared<const CovStats>(std::move(*total));
    std::lock_guard lock(mu_);
    return sums_.emplace(std::move(key), out).first->second;
  }

  std::shared_ptr<const CcaBasis> basis(std::span<const std::size_t> train, std::size_t L, std::size_t Ly) {
    TrainKey key{std::vector<std::size_t>(train.begin(), train.end()), L, Ly};
    {
      std::lock_guard lock(mu_);
      auto it = bases_.find(key);
      if (it != bases_.end()) return it->second;
    }
    auto b = std::make_shared<const CcaBasis>(cca_basis(*train_stats(train, L, Ly)));
    std::lock_guard lock(mu_);
    return bases_.emplace(std::move(key), b).first->second;
  }

 private:
  UnitData build(std::size_t u) const {
    const CvUnit& cu = plan_.units[u];
    const Trial& tr = session_.trials[cu.trial];
    const std::size_t len = cu.end - cu.begin;
    UnitData d;
    d.trial_id = tr.id;
    d.fs = fs_;
    d.start_s = static_cast<double>(cu.begin) / fs_;

    MultichannelSignal sub;
    sub.fs = fs_;
    sub.samples = Matrix(len, channels_.size());
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t k = 0; k < channels_.size(); ++k) sub.samples(t, k) = tr.eeg.samples(cu.begin + t, channels_[k]);
    for (std::size_t k : channels_) sub.channel_names.push_back(session_.channel_names.at(k));
    d.eeg = zscore(sub).samples;

    Trial shell;
    shell.eeg.fs = fs_;
    shell.eeg.samples = Matrix(len, 0);
    for (const auto& sp : tr.speakers) {
      const auto b = sp.envelope.samples.begin() + static_cast<std::ptrdiff_t>(cu.begin);
      d.speakers.push_back(zscore(std::span<const double>(&*b, len)));
      d.speaker_ids.push_back(sp.id);
      shell.speakers.push_back({sp.id, sp.direction_deg, {}});
    }
    for (const auto& span : tr.timeline)
      shell.timeline.push_back({span.start_s - d.start_s, span.end_s - d.start_s, span.attended});
    d.streams = build_attended_streams(shell, d.speakers);

    if (tr.timeline.size() == 2 && tr.timeline[0].attended && tr.timeline[1].attended &&
        *tr.timeline[0].attended != *tr.timeline[1].attended) {
      const double sw = tr.timeline[1].start_s - d.start_s;
      if (sw > 0.0 && sw < static_cast<double>(len) / fs_) {
        d.switch_s = sw;
        d.switch_from = *tr.slot_of(*tr.timeline[0].attended);
        d.switch_to = *tr.slot_of(*tr.timeline[1].attended);
      }
    }
    return d;
  }

  std::shared_ptr<const CovStats> unit_stats(std::size_t u, std::size_t L, std::size_t Ly) {
    const auto key = std::make_tuple(u, L, Ly);
    {
      std::lock_guard lock(mu_);
      auto it = unit_stats_.find(key);
      if (it != unit_stats_.end()) return it->second;
    }
    const UnitData& d = unit(u);
    const LaggedDesign x = build_lagged(d.eeg, L);
    const std::vector<LaggedDesign> xs{x};
    const std::vector<RowMask> masks{d.streams.defined};
    std::shared_ptr<const CovStats> s;
    if (Ly == 0) {
      const std::vector<Vector> ys{d.streams.attended};
      s = std::make_shared<const CovStats>(accumulate(xs, ys, masks));
    } else {
      const std::vector<LaggedDesign> ys{build_lagged(d.streams.attended, Ly)};
      s = std::make_shared<const CovStats>(accumulate(xs, ys, masks));
    }
    std::lock_guard lock(mu_);
    return unit_stats_.emplace(key, s).first->second;
  }

  const Session& session_;
  const CvPlan& plan_;
  const RunConfig& cfg_;
  std::vector<std::size_t> channels_;
  double fs_ = 0.0;
  std::vector<std::unique_ptr<UnitData>> built_;
  std::unique_ptr<std::once_flag[]> flags_;
  std::mutex mu_;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::shared_ptr<const CovStats>> unit_stats_;
  std::map<TrainKey, std::shared_ptr<const CovStats>> sums_;
  std::map<TrainKey, std::shared_ptr<const CcaBasis>> bases_;
};

// ---------------------------------------------------------------------------
// Fitting and evaluation

void classifier_windows(Context& ctx, std::span<const std::size_t> units, std::size_t w, std::vector<Matrix>& segs,
                        std::vector<int>& labels) {
  for (std::size_t u : units) {
    const UnitData& d = ctx.unit(u);
    for (const auto& win : windows_of(d, w)) {
      segs.push_back(rows_of(d.eeg, win.begin, win.end));
      labels.push_back(d.streams.direction_class[(win.begin + win.end) / 2]);
    }
  }
}

Matrix feature_rows(const std::vector<Vector>& rows) {
  Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  return m;
}

FittedModel fit_model(Context& ctx, const ParamSet& p, std::span<const std::size_t> train, std::size_t w) {
  const RunConfig& cfg = ctx.config();
  switch (cfg.model) {
    case ModelKind::Wf: return wf_fit(*ctx.train_stats(train, p.L, 0), p.lambda);
    case ModelKind::Cca:
      return cca_fit(*ctx.train_stats(train, p.L, p.Ly), *ctx.basis(train, p.L, p.Ly), p.reg, p.n_components);
    case ModelKind::Csp:
    case ModelKind::Rgc: {
      std::vector<Matrix> segs;
      std::vector<int> labels;
      classifier_windows(ctx, train, w, segs, labels);
      if (segs.empty()) throw Error(ErrorCode::DegenerateClass, "no labelled training windows");
      std::vector<Vector> feats;
      if (cfg.model == ModelKind::Csp) {
        CspOptions opt = cfg.csp;
        opt.f_per = p.csp_f;
        CspClassifier m{csp_fit(segs, labels, 3, ctx.fs(), opt), {}};
        for (const auto& s : segs) feats.push_back(csp_features(s, m.csp));
        m.lda = lda_fit(feature_rows(feats), labels, 3, p.lda_gamma);
        return m;
      }
      RgcClassifier m{rgc_fit(segs, p.rgc_shrinkage), {}};
      for (const auto& s : segs) feats.push_back(tangent_features(s, m.rgc));
      m.lda = lda_fit(feature_rows(feats), labels, 3, p.lda_gamma);
      return m;
    }
  }
  throw Error(ErrorCode::BadConfig, "unknown model");
}

struct UnitEval {
  std::vector<WindowRecord> windows;
  std::optional<TrialCurve> curve;
};

UnitEval evaluate_unit(Context& ctx, const FittedModel& model, std::size_t u, std::size_t w, bool with_curve) {
  const UnitData& d = ctx.unit(u);
  UnitEval out;
  const auto wins = windows_of(d, w);

  if (std::holds_alternative<CspClassifier>(model) || std::holds_alternative<RgcClassifier>(model)) {
    if (wins.empty()) return out;
    std::vector<Vector> feats;
    for (const auto& win : wins) {
      const Matrix seg = rows_of(d.eeg, win.begin, win.end);
      if (auto* m = std::get_if<CspClassifier>(&model)) feats.push_back(csp_features(seg, m->csp));
      else feats.push_back(tangent_features(seg, std::get<RgcClassifier>(model).rgc));
    }
    const LdaModel& lda = std::holds_alternative<CspClassifier>(model) ? std::get<CspClassifier>(model).lda
                                                                       : std::get<RgcClassifier>(model).lda;
    const auto pred = lda_predict(feature_rows(feats), lda);
    for (std::size_t i = 0; i < wins.size(); ++i) {
      WindowRecord r;
      r.trial_id = d.trial_id;
      r.index = wins[i].index;
      r.start_s = d.start_s + static_cast<double>(wins[i].begin) / d.fs;
      r.end_s = d.start_s + static_cast<double>(wins[i].end) / d.fs;
      r.label = d.streams.direction_class[(wins[i].begin + wins[i].end) / 2];
      r.predicted = pred[i];
      r.correct = r.predicted == r.label;
      out.windows.push_back(std::move(r));
    }
    return out;
  }

  // Envelope models: reconstructions per CCA component (one for WF) and the
  // matching target-side signal per candidate.
  std::vector<Vector> recon;
  std::vector<std::vector<Vector>> cand;  // [candidate][component]
  std::vector<std::vector<Vector>> spk;   // [speaker][component], first component only for curves
  std::vector<Vector> composites{d.streams.attended};
  for (const auto& un : d.streams.unattended) composites.push_back(un);

  if (const auto* wf = std::get_if<WfModel>(&model)) {
    recon.push_back(lagged_apply(d.eeg, wf->w, wf->lags));
    for (const auto& c : composites) cand.push_back({c});
    for (const auto& s : d.speakers) spk.push_back({s});
  } else {
    const auto& cca = std::get<CcaModel>(model);
    const std::size_t k = cca.n_components();
    for (std::size_t i = 0; i < k; ++i) recon.push_back(lagged_apply(d.eeg, cca.wx.column(i), cca.lags));
    for (const auto& c : composites) {
      std::vector<Vector> comps;
      for (std::size_t i = 0; i < k; ++i) comps.push_back(lagged_apply(c, cca.wy.column(i)));
      cand.push_back(std::move(comps));
    }
    if (with_curve)
      for (const auto& s : d.speakers) spk.push_back({lagged_apply(s, cca.wy.column(0))});
  }

  for (const auto& win : wins) {
    WindowRecord r;
    r.trial_id = d.trial_id;
    r.index = win.index;
    r.start_s = d.start_s + static_cast<double>(win.begin) / d.fs;
    r.end_s = d.start_s + static_cast<double>(win.end) / d.fs;
    for (const auto& c : cand) {
      double acc = 0.0;
      for (std::size_t i = 0; i < recon.size(); ++i)
        acc += pcc(std::span<const double>(recon[i]).subspan(win.begin, win.end - win.begin),
                   std::span<const double>(c[i]).subspan(win.begin, win.end - win.begin));
      r.rhos.push_back(acc / static_cast<double>(recon.size()));
    }
    const WindowDecision dec = decide_window(r.rhos, 0);
    const std::size_t mid = (win.begin + win.end) / 2;
    r.label = d.streams.role_slot[0][mid];
    r.correct = dec.correct;
    r.tie = dec.tie;
    r.predicted = dec.tie ? -1 : d.streams.role_slot[dec.predicted][mid];
    out.windows.push_back(std::move(r));
  }

  if (with_curve) {
    TrialCurve tc;
    tc.trial_id = d.trial_id;
    tc.start_s = d.start_s;
    tc.speaker_ids = d.speaker_ids;
    std::vector<Vector> firsts;
    for (const auto& s : spk) firsts.push_back(s.front());
    tc.curve = time_pcc_curve(recon.front(), firsts, d.fs, ctx.config().track_seg_s);
    if (d.switch_s && tc.curve.segments() >= 2) {
      tc.switch_s = d.start_s + *d.switch_s;
      tc.crossover_s = d.start_s + detect_crossover(tc.curve.pcc[d.switch_from], tc.curve.pcc[d.switch_to],
                                                    tc.curve.seg_s);
    }
    out.curve = std::move(tc);
  }
  return out;
}

std::vector<WindowRecord> evaluate_units(Context& ctx, const FittedModel& model, std::span<const std::size_t> units,
                                         std::size_t w) {
  std::vector<WindowRecord> out;
  for (std::size_t u : units) {
    auto e = evaluate_unit(ctx, model, u, w, false);
    out.insert(out.end(), e.windows.begin(), e.windows.end());
  }
  return out;
}

std::vector<ParamSet> candidates_for(const RunConfig& cfg) {
  return expand_grid(cfg.grid ? *cfg.grid : default_grid(cfg.model), cfg.model);
}

Objective objective_for(Context& ctx) {
  const std::size_t w = window_samples(ctx.config().tune_window_s.value_or(ctx.config().window_s), ctx.fs());
  return [&ctx, w](const ParamSet& p, std::span<const std::size_t> train, std::span<const std::size_t> eval) {
    const FittedModel m = fit_model(ctx, p, train, w);
    return accuracy_of(evaluate_units(ctx, m, eval, w));
  };
}

std::optional<ParamSet> fixed_for(const RunConfig& cfg, std::size_t loop, std::size_t n_loops) {
  if (cfg.fixed_params.empty()) return std::nullopt;
  if (cfg.fixed_params.size() == 1) return cfg.fixed_params.front();
  if (cfg.fixed_params.size() != n_loops)
    throw Error(ErrorCode::BadConfig, "fixed parameters must be given once or once per outer loop");
  return cfg.fixed_params[loop];
}

LoopFit fit_loop(Context& ctx, const CvPlan& plan, std::size_t loop) {
  const RunConfig& cfg = ctx.config();
  LoopFit out;
  if (auto fixed = fixed_for(cfg, loop, plan.loops.size())) {
    out.params = *fixed;
    out.validation_score = kNaN;
  } else {
    const auto cands = candidates_for(cfg);
    const auto loops = tuning_loops(plan.loops[loop]);
    const SearchResult r = search_hyperparams(loops, cands, objective_for(ctx));
    out.params = r.best;
    out.validation_score = r.best_score;
  }
  out.model = fit_model(ctx, out.params, plan.loops[loop].train, window_samples(cfg.window_s, ctx.fs()));
  return out;
}

struct LoopOutcome {
  LoopFit fit;
  std::vector<WindowRecord> windows;
  std::vector<TrialCurve> curves;
  std::optional<ChannelWeightStats> weights;
};

LoopOutcome run_loop(Context& ctx, const CvPlan& plan, std::size_t loop) {
  LoopOutcome out;
  out.fit = fit_loop(ctx, plan, loop);
  const std::size_t w = window_samples(ctx.config().window_s, ctx.fs());
  const bool envelope = is_envelope_model(ctx.config().model);
  for (std::size_t u : plan.loops[loop].test) {
    auto e = evaluate_unit(ctx, out.fit.model, u, w, envelope);
    for (auto& r : e.windows) {
      r.fold = plan.loops[loop].test_fold;
      out.windows.push_back(std::move(r));
    }
    if (e.curve) {
      e.curve->fold = plan.loops[loop].test_fold;
      out.curves.push_back(std::move(*e.curve));
    }
  }
  if (const auto* wf = std::get_if<WfModel>(&out.fit.model)) out.weights = channel_weight_stats(*wf);
  if (const auto* cca = std::get_if<CcaModel>(&out.fit.model)) out.weights = channel_weight_stats(*cca);
  return out;
}

template <typename F>
auto run_loops(std::size_t n, std::size_t jobs, F&& f) {
  using R = decltype(f(std::size_t{0}));
  std::vector<R> out;
  out.reserve(n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(f(i));
    return out;
  }
  for (std::size_t start = 0; start < n; start += jobs) {
    std::vector<std::future<R>> batch;
    for (std::size_t i = start; i < std::min(n, start + jobs); ++i) batch.push_back(std::async(std::launch::async, f, i));
    for (auto& fut : batch) out.push_back(fut.get());
  }
  return out;
}

MetricsReport assemble(const Session& session, const CvPlan& plan, const RunConfig& cfg,
                       std::vector<LoopOutcome> outcomes) {
  MetricsReport rep;
  rep.model = cfg.model;
  rep.protocol = cfg.protocol;
  rep.window_s = cfg.window_s;
  for (std::size_t c : resolve_channels(session, cfg.channels)) rep.channels.push_back(session.channel_names[c]);

  Vector fold_acc, fold_f1;
  std::vector<ChannelWeightStats> weights;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    auto& o = outcomes[i];
    FoldResult f;
    f.fold = plan.loops[i].test_fold;
    f.params = o.fit.params;
    f.validation_score = o.fit.validation_score;
    f.accuracy = accuracy_of(o.windows);
    f.macro_f1 = f1_of(o.windows);
    f.n_windows = o.windows.size();
    f.model_text = serialize_model(o.fit.model);
    if (!o.windows.empty()) {
      fold_acc.push_back(f.accuracy);
      fold_f1.push_back(f.macro_f1);
    }
    rep.folds.push_back(std::move(f));
    rep.windows.insert(rep.windows.end(), o.windows.begin(), o.windows.end());
    for (auto& c : o.curves) rep.curves.push_back(std::move(c));
    if (o.weights) weights.push_back(*o.weights);
  }
  rep.accuracy = fold_acc.empty() ? kNaN : mean(fold_acc);
  rep.accuracy_std = stddev(fold_acc);
  rep.macro_f1 = fold_f1.empty() ? kNaN : mean(fold_f1);
  rep.macro_f1_std = stddev(fold_f1);
  rep.pooled_accuracy = accuracy_of(rep.windows);
  rep.pooled_macro_f1 = f1_of(rep.windows);

  if (is_envelope_model(cfg.model) && !rep.windows.empty()) {
    double att = 0.0, u1 = 0.0, u2 = 0.0;
    std::size_t n2 = 0;
    for (const auto& r : rep.windows) {
      att += r.rhos[0];
      u1 += r.rhos[1];
      if (r.rhos.size() > 2) {
        u2 += r.rhos[2];
        ++n2;
      }
    }
    const double n = static_cast<double>(rep.windows.size());
    rep.mean_pcc.attended = att / n;
    rep.mean_pcc.unattended1 = u1 / n;
    rep.delta_pcc1 = rep.mean_pcc.attended - rep.mean_pcc.unattended1;
    if (n2 > 0) {
      rep.mean_pcc.unattended2 = u2 / static_cast<double>(n2);
      rep.delta_pcc2 = rep.mean_pcc.attended - *rep.mean_pcc.unattended2;
    }
  }
  if (!weights.empty()) {
    const std::size_t C = weights.front().max_abs.size();
    rep.channel_stats.max_abs.assign(C, 0.0);
    rep.channel_stats.mean_sq.assign(C, 0.0);
    for (const auto& w : weights)
      for (std::size_t c = 0; c < C; ++c) {
        rep.channel_stats.max_abs[c] += w.max_abs[c] / static_cast<double>(weights.size());
        rep.channel_stats.mean_sq[c] += w.mean_sq[c] / static_cast<double>(weights.size());
      }
  }
  return rep;
}

}  // namespace

std::string serialize_model(const FittedModel& model) {
  std::string out;
  if (const auto* m = std::get_if<WfModel>(&model)) {
    out += "wf lags=" + std::to_string(m->lags) + " channels=" + std::to_string(m->channels);
    put(out, " lambda=%a\n", m->lambda);
    put_vector(out, "w", m->w);
  } else if (const auto* m = std::get_if<CcaModel>(&model)) {
    out += "cca lags=" + std::to_string(m->lags) + " channels=" + std::to_string(m->channels) +
           " target_lags=" + std::to_string(m->target_lags);
    put(out, " reg=%a\n", m->reg);
    put_matrix(out, "wx", m->wx);
    put_matrix(out, "wy", m->wy);
    put_vector(out, "correlations", m->correlations);
  } else if (const auto* m = std::get_if<CspClassifier>(&model)) {
    out += "csp classes=" + std::to_string(m->csp.n_classes) + " f_per=" + std::to_string(m->csp.f_per) +
           " channels=" + std::to_string(m->csp.channels);
    put(out, " fs=%a\n", m->csp.fs);
    for (std::size_t j = 0; j < m->csp.bands.size(); ++j) {
      put(out, "band %a", m->csp.bands[j].first);
      put(out, " %a\n", m->csp.bands[j].second);
      if (j < m->csp.band_filters.size())
        for (const auto& s : m->csp.band_filters[j].sections) {
          out += "sos";
          for (double v : {s.b0, s.b1, s.b2, s.a1, s.a2}) put(out, " %a", v);
          out += '\n';
        }
    }
    for (const auto& f : m->csp.filters) put_matrix(out, "filter", f);
    put_lda(out, m->lda);
  } else {
    const auto& rg = std::get<RgcClassifier>(model);
    out += "rgc channels=" + std::to_string(rg.rgc.channels);
    put(out, " shrinkage=%a\n", rg.rgc.shrinkage);
    put_matrix(out, "mean", rg.rgc.mean.matrix());
    put_matrix(out, "mean_inv_sqrt", rg.rgc.mean_inv_sqrt.matrix());
    put_lda(out, rg.lda);
  }
  return out;
}

CvPlan make_plan(const Session& session, const RunConfig& config) {
  std::vector<TrialMeta> metas;
  for (const auto& t : session.trials) {
    int max_id = 0;
    for (const auto& s : t.speakers) max_id = std::max(max_id, s.id);
    metas.push_back({t.id, t.task, max_id <= 3 ? 0 : 1, t.eeg.length()});
  }
  std::size_t k = config.n_folds;
  if (k == 0) {
    if (config.protocol == Protocol::WithinTrial) k = 5;
    else if (config.protocol == Protocol::Loto || config.protocol == Protocol::NestedLoto)
      k = std::min<std::size_t>(9, metas.size());
    else k = 9;
  }
  return make_folds(metas, config.protocol, k, config.seed);
}

LoopFit fit_outer(const Session& session, const CvPlan& plan, const RunConfig& config, std::size_t loop) {
  if (loop >= plan.loops.size()) throw Error(ErrorCode::BadProtocolConfig, "outer loop index out of range");
  Context ctx(session, plan, config);
  return fit_loop(ctx, plan, loop);
}

MetricsReport run_pipeline(const Session& session, const RunConfig& config) {
  return run_pipeline(session, make_plan(session, config), config);
}

MetricsReport run_pipeline(const Session& session, const CvPlan& plan, const RunConfig& config) {
  if (config.protocol != plan.protocol) throw Error(ErrorCode::BadProtocolConfig, "plan protocol differs from config");
  validate_plan(plan);
  Context ctx(session, plan, config);
  auto outcomes = run_loops(plan.loops.size(), config.jobs, [&](std::size_t i) { return run_loop(ctx, plan, i); });
  return assemble(session, plan, config, std::move(outcomes));
}

GroupReport run_pipeline_group(const std::vector<Session>& sessions, const RunConfig& config, bool group_tuning) {
  if (sessions.empty()) throw Error(ErrorCode::BadConfig, "no sessions");
  GroupReport g;
  if (!group_tuning || !config.fixed_params.empty()) {
    for (const auto& s : sessions) g.subjects.push_back(run_pipeline(s, config));
  } else {
    std::vector<CvPlan> plans;
    std::vector<std::unique_ptr<Context>> ctxs;
    for (const auto& s : sessions) {
      plans.push_back(make_plan(s, config));
      if (plans.back().loops.size() != plans.front().loops.size())
        throw Error(ErrorCode::BadProtocolConfig, "group tuning needs the same number of outer loops per subject");
    }
    for (std::size_t i = 0; i < sessions.size(); ++i)
      ctxs.push_back(std::make_unique<Context>(sessions[i], plans[i], config));
    const auto cands = candidates_for(config);
    std::vector<ParamSet> chosen;
    for (std::size_t f = 0; f < plans.front().loops.size(); ++f) {
      Vector total(cands.size(), 0.0);
      for (std::size_t i = 0; i < sessions.size(); ++i) {
        const auto loops = tuning_loops(plans[i].loops[f]);
        const auto r = search_hyperparams(loops, cands, objective_for(*ctxs[i]));
        for (std::size_t c = 0; c < cands.size(); ++c) total[c] += r.scores[c];
      }
      std::size_t best = 0;
      for (std::size_t c = 1; c < cands.size(); ++c)
        if (total[c] > total[best]) best = c;
      chosen.push_back(cands[best]);
    }
    ctxs.clear();
    RunConfig fixed = config;
    fixed.fixed_params = chosen;
    for (std::size_t i = 0; i < sessions.size(); ++i) g.subjects.push_back(run_pipeline(sessions[i], plans[i], fixed));
  }
  Vector acc, f1;
  for (const auto& r : g.subjects) {
    if (!std::isnan(r.accuracy)) acc.push_back(r.accuracy);
    if (!std::isnan(r.macro_f1)) f1.push_back(r.macro_f1);
  }
  g.accuracy = acc.empty() ? kNaN : mean(acc);
  g.accuracy_std = stddev(acc);
  g.macro_f1 = f1.empty() ? kNaN : mean(f1);
  g.macro_f1_std = stddev(f1);
  return g;
}

Layout named_layout(const std::string& name, const std::vector<std::string>& chans) {
  auto seq = [](char side, int lo, int hi) {
    std::vector<std::string> v;
    for (int i = lo; i <= hi; ++i) v.push_back(std::string(1, side) + std::to_string(i));
    return v;
  };
  auto join = [](std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  Layout l{name, {}};
  if (name == "full") l.channels = chans;
  else if (name == "left") l.channels = seq('L', 1, 8);
  else if (name == "right") l.channels = seq('R', 1, 8);
  else if (name == "upper") l.channels = join(seq('L', 1, 4), seq('R', 1, 4));
  else if (name == "lower") l.channels = join(seq('L', 5, 8), seq('R', 5, 8));
  else throw Error(ErrorCode::BadConfig, "unknown layout '" + name + "'");
  for (const auto& c : l.channels)
    if (std::find(chans.begin(), chans.end(), c) == chans.end())
      throw Error(ErrorCode::BadChannelIndex, "layout '" + name + "' needs channel '" + c + "'");
  return l;
}

std::vector<LayoutReport> run_channel_ablation(const Session& session, const std::vector<Layout>& layouts,
                                               const RunConfig& config) {
  if (layouts.empty()) throw Error(ErrorCode::BadConfig, "no layouts given");
  for (const auto& l : layouts) {
    if (l.channels.empty()) throw Error(ErrorCode::BadChannelIndex, "layout '" + l.name + "' is empty");
    resolve_channels(session, l.channels);
  }
  RunConfig full_cfg = config;
  full_cfg.channels.clear();
  const CvPlan plan = make_plan(session, full_cfg);
  const MetricsReport full = run_pipeline(session, plan, full_cfg);
  std::vector<ParamSet> chosen;
  for (const auto& f : full.folds) chosen.push_back(f.params);

  std::vector<LayoutReport> out;
  for (const auto& l : layouts) {
    if (l.channels == session.channel_names) {
      out.push_back({l, full});
      continue;
    }
    RunConfig cfg = config;
    cfg.channels = l.channels;
    cfg.fixed_params = chosen;
    out.push_back({l, run_pipeline(session, plan, cfg)});
  }
  return out;
}

}  // namespace aad
