#include "aad/export.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace aad {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ordered_json json_num(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json params_json(const ParamSet& p, ModelKind m) {
  switch (m) {
    case ModelKind::Wf: return {{"lambda", p.lambda}, {"L", p.L}};
    case ModelKind::Cca: return {{"reg", p.reg}, {"L", p.L}, {"L_y", p.Ly}, {"n_components", p.n_components}};
    case ModelKind::Csp: return {{"csp_f", p.csp_f}, {"lda_gamma", p.lda_gamma}};
    case ModelKind::Rgc: return {{"rgc_shrinkage", p.rgc_shrinkage}, {"lda_gamma", p.lda_gamma}};
  }
  return {};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace

std::string summary_json(const MetricsReport& r) {
  ordered_json j;
  j["model"] = to_string(r.model);
  j["protocol"] = to_string(r.protocol);
  j["window_s"] = r.window_s;
  j["channels"] = r.channels;
  j["n_windows"] = r.windows.size();
  j["accuracy"] = {{"mean", json_num(r.accuracy)}, {"std", json_num(r.accuracy_std)}};
  j["macro_f1"] = {{"mean", json_num(r.macro_f1)}, {"std", json_num(r.macro_f1_std)}};
  j["pooled_accuracy"] = json_num(r.pooled_accuracy);
  j["pooled_macro_f1"] = json_num(r.pooled_macro_f1);
  if (is_envelope_model(r.model)) {
    j["mean_pcc"] = {{"attended", r.mean_pcc.attended},
                     {"unattended1", r.mean_pcc.unattended1},
                     {"unattended2", r.mean_pcc.unattended2 ? json_num(*r.mean_pcc.unattended2) : nullptr}};
    j["delta_pcc1"] = json_num(r.delta_pcc1);
    j["delta_pcc2"] = r.delta_pcc2 ? json_num(*r.delta_pcc2) : nullptr;
  }
  j["folds"] = ordered_json::array();
  for (const auto& f : r.folds)
    j["folds"].push_back({{"fold", f.fold},
                          {"accuracy", json_num(f.accuracy)},
                          {"macro_f1", json_num(f.macro_f1)},
                          {"n_windows", f.n_windows},
                          {"validation_score", json_num(f.validation_score)},
                          {"params", params_json(f.params, r.model)}});
  return j.dump(2) + "\n";
}

std::string windows_csv(const MetricsReport& r) {
  std::string out = "trial_id,fold,window,start_s,end_s,label,predicted,correct,tie,rho_attended,rho_unattended1,rho_unattended2\n";
  for (const auto& w : r.windows) {
    out += std::to_string(w.trial_id) + ',' + std::to_string(w.fold) + ',' + std::to_string(w.index) + ',' +
           num(w.start_s) + ',' + num(w.end_s) + ',' + std::to_string(w.label) + ',' + std::to_string(w.predicted) +
           ',' + (w.correct ? "1" : "0") + ',' + (w.tie ? "1" : "0");
    for (std::size_t k = 0; k < 3; ++k) out += ',' + (k < w.rhos.size() ? num(w.rhos[k]) : std::string());
    out += '\n';
  }
  return out;
}

std::string time_pcc_csv(const MetricsReport& r) {
  std::string out = "trial_id,fold,speaker_id,segment,start_s,pcc\n";
  for (const auto& c : r.curves)
    for (std::size_t k = 0; k < c.curve.pcc.size(); ++k)
      for (std::size_t s = 0; s < c.curve.segments(); ++s)
        out += std::to_string(c.trial_id) + ',' + std::to_string(c.fold) + ',' + std::to_string(c.speaker_ids[k]) +
               ',' + std::to_string(s) + ',' + num(c.start_s + static_cast<double>(s) * c.curve.seg_s) + ',' +
               num(c.curve.pcc[k][s]) + '\n';
  return out;
}

std::string tracking_csv(const MetricsReport& r) {
  std::string out = "trial_id,fold,switch_s,crossover_s\n";
  for (const auto& c : r.curves)
    if (c.switch_s && c.crossover_s)
      out += std::to_string(c.trial_id) + ',' + std::to_string(c.fold) + ',' + num(*c.switch_s) + ',' +
             num(*c.crossover_s) + '\n';
  return out;
}

std::string channel_stats_csv(const MetricsReport& r) {
  std::string out = "channel,max_abs,mean_sq\n";
  for (std::size_t c = 0; c < r.channel_stats.max_abs.size(); ++c)
    out += r.channels.at(c) + ',' + num(r.channel_stats.max_abs[c]) + ',' + num(r.channel_stats.mean_sq[c]) + '\n';
  return out;
}

void export_results(const MetricsReport& report, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "models", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
  write_text(dir / "summary.json", summary_json(report));
  write_text(dir / "windows.csv", windows_csv(report));
  write_text(dir / "time_pcc.csv", time_pcc_csv(report));
  write_text(dir / "channel_stats.csv", channel_stats_csv(report));
  for (const auto& f : report.folds) {
    char name[32];
    std::snprintf(name, sizeof name, "fold_%02zu.txt", f.fold);
    write_text(dir / "models" / name, f.model_text);
  }
}

}  // namespace aad
