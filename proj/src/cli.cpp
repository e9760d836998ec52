#include "aad/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "aad/export.hpp"
#include "aad/pipeline.hpp"
#include "json.hpp"

namespace aad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Numerical: return "numerical";
  }
  return "internal";
}

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return kExitConfig;
    case ErrorCategory::Data: return kExitData;
    case ErrorCategory::Io: return kExitIo;
    case ErrorCategory::Numerical: return kExitNumerical;
  }
  return kExitInternal;
}

// Options shared by run, ablate and track. Flags override the config file.
struct RunOptions {
  std::vector<std::string> manifests;
  std::string config_path;
  std::string model, protocol, grid_path, channels, out = "aad_results";
  double window_s = 30.0, tune_window_s = 0.0, seg_s = 1.0;
  std::uint64_t seed = 1;
  std::size_t jobs = 1, folds = 0;
  bool group_tuning = false;
  CLI::App* app = nullptr;

  bool given(const char* flag) const { return app->count(flag) > 0; }
};

void add_run_options(CLI::App* sub, RunOptions& o) {
  o.app = sub;
  sub->add_option("--manifest", o.manifests, "Session manifest (repeat for several subjects)")->required();
  sub->add_option("--config", o.config_path, "JSON run configuration");
  sub->add_option("--model", o.model, "wf, cca, csp or rgc");
  sub->add_option("--protocol", o.protocol, "within_trial, loto, nested_loto, loso or nested_loso");
  sub->add_option("--window", o.window_s, "Decision window in seconds");
  sub->add_option("--tune-window", o.tune_window_s, "Window used while tuning (defaults to --window)");
  sub->add_option("--grid", o.grid_path, "JSON hyperparameter grid");
  sub->add_option("--seed", o.seed, "Fold seed");
  sub->add_option("--channels", o.channels, "Comma-separated channel subset");
  sub->add_option("--jobs", o.jobs, "Outer loops run concurrently");
  sub->add_option("--folds", o.folds, "Number of folds (0 = protocol default)");
  sub->add_option("--seg", o.seg_s, "Time-PCC segment length in seconds");
  sub->add_option("--out", o.out, "Output directory");
  sub->add_flag("--group-tuning", o.group_tuning, "Share hyperparameters across subjects");
}

RunConfig build_run_config(const RunOptions& o) {
  RunConfig cfg;
  json file;
  std::optional<json> grid_json;
  if (!o.config_path.empty()) {
    try {
      file = json::parse(read_file(o.config_path));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::BadConfig, std::string("run config is not valid JSON: ") + e.what());
    }
    static const std::set<std::string> known = {"model", "protocol", "window_s", "tune_window_s", "grid", "seed",
                                                "channels", "jobs", "folds", "seg_s"};
    for (const auto& [k, v] : file.items())
      if (!known.count(k)) throw Error(ErrorCode::BadConfig, "unknown run config field '" + k + "'");
    try {
      if (file.contains("model")) cfg.model = parse_model(file["model"].get<std::string>());
      if (file.contains("protocol")) cfg.protocol = parse_protocol(file["protocol"].get<std::string>());
      if (file.contains("window_s")) cfg.window_s = file["window_s"].get<double>();
      if (file.contains("tune_window_s")) cfg.tune_window_s = file["tune_window_s"].get<double>();
      if (file.contains("seed")) cfg.seed = file["seed"].get<std::uint64_t>();
      if (file.contains("channels")) cfg.channels = file["channels"].get<std::vector<std::string>>();
      if (file.contains("jobs")) cfg.jobs = file["jobs"].get<std::size_t>();
      if (file.contains("folds")) cfg.n_folds = file["folds"].get<std::size_t>();
      if (file.contains("seg_s")) cfg.track_seg_s = file["seg_s"].get<double>();
      if (file.contains("grid")) grid_json = file["grid"];
    } catch (const json::exception& e) {
      throw Error(ErrorCode::BadConfig, std::string("run config field has the wrong type: ") + e.what());
    }
  }
  if (o.given("--model")) cfg.model = parse_model(o.model);
  if (o.given("--protocol")) cfg.protocol = parse_protocol(o.protocol);
  if (o.given("--window")) cfg.window_s = o.window_s;
  if (o.given("--tune-window")) cfg.tune_window_s = o.tune_window_s;
  if (o.given("--seed")) cfg.seed = o.seed;
  if (o.given("--channels")) cfg.channels = split_list(o.channels);
  if (o.given("--jobs")) cfg.jobs = o.jobs;
  if (o.given("--folds")) cfg.n_folds = o.folds;
  if (o.given("--seg")) cfg.track_seg_s = o.seg_s;
  if (o.given("--grid")) cfg.grid = grid_from_json(read_file(o.grid_path), cfg.model);
  else if (grid_json) cfg.grid = grid_from_json(grid_json->dump(), cfg.model);
  if (!(cfg.window_s > 0.0)) throw Error(ErrorCode::BadConfig, "window must be positive");
  if (!(cfg.track_seg_s > 0.0)) throw Error(ErrorCode::BadConfig, "segment length must be positive");
  if (cfg.jobs < 1) throw Error(ErrorCode::BadConfig, "jobs must be at least 1");
  return cfg;
}

std::string summary_line(const RunConfig& cfg, double acc, double f1) {
  return std::string("model=") + to_string(cfg.model) + " protocol=" + to_string(cfg.protocol) +
         " window=" + fmt("%g", cfg.window_s) + " acc=" + fmt("%.4f", acc) + " f1=" + fmt("%.4f", f1);
}

int cmd_synth(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
              std::ostream& out) {
  SynthConfig cfg = synth_config_from_json(read_file(config_path));
  if (seed) cfg.seed = *seed;
  const Session s = synth_generate(cfg);
  save_session(s, out_dir);
  out << "synth trials=" << s.trials.size() << " channels=" << s.channel_names.size() << " out=" << out_dir << "\n";
  return kExitOk;
}

int cmd_run(const RunOptions& o, std::ostream& out) {
  const RunConfig cfg = build_run_config(o);
  if (o.manifests.size() == 1) {
    const Session s = load_session(o.manifests.front());
    const MetricsReport r = run_pipeline(s, cfg);
    export_results(r, o.out);
    out << summary_line(cfg, r.accuracy, r.macro_f1) << "\n";
    return kExitOk;
  }
  std::vector<Session> sessions;
  for (const auto& m : o.manifests) sessions.push_back(load_session(m));
  const GroupReport g = run_pipeline_group(sessions, cfg, o.group_tuning);
  for (std::size_t i = 0; i < g.subjects.size(); ++i) {
    const std::string name = sessions[i].subject.empty() ? "subject_" + std::to_string(i) : sessions[i].subject;
    export_results(g.subjects[i], fs::path(o.out) / name);
  }
  out << summary_line(cfg, g.accuracy, g.macro_f1) << " subjects=" << g.subjects.size() << "\n";
  return kExitOk;
}

std::vector<Layout> parse_layouts(const std::string& spec, const Session& s) {
  std::vector<Layout> out;
  if (fs::is_regular_file(spec)) {
    json j;
    try {
      j = json::parse(read_file(spec));
      for (const auto& [name, chans] : j.items()) out.push_back({name, chans.get<std::vector<std::string>>()});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::BadConfig, std::string("layouts file must map names to channel lists: ") + e.what());
    }
  } else {
    for (const auto& name : split_list(spec)) out.push_back(named_layout(name, s.channel_names));
  }
  if (out.empty()) throw Error(ErrorCode::BadConfig, "no layouts given");
  return out;
}

int cmd_ablate(const RunOptions& o, const std::string& layouts, std::ostream& out) {
  const RunConfig cfg = build_run_config(o);
  if (o.manifests.size() != 1) throw Error(ErrorCode::BadConfig, "ablate takes exactly one manifest");
  const Session s = load_session(o.manifests.front());
  const auto reports = run_channel_ablation(s, parse_layouts(layouts, s), cfg);
  for (const auto& lr : reports) {
    export_results(lr.report, fs::path(o.out) / lr.layout.name);
    out << "layout=" << lr.layout.name << " " << summary_line(cfg, lr.report.accuracy, lr.report.macro_f1) << "\n";
  }
  return kExitOk;
}

int cmd_track(const RunOptions& o, std::ostream& out) {
  const RunConfig cfg = build_run_config(o);
  if (!is_envelope_model(cfg.model))
    throw Error(ErrorCode::BadConfig, std::string("track needs an envelope model (wf or cca), got ") + to_string(cfg.model));
  if (o.manifests.size() != 1) throw Error(ErrorCode::BadConfig, "track takes exactly one manifest");
  const Session s = load_session(o.manifests.front());
  const MetricsReport r = run_pipeline(s, cfg);
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + o.out);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream f(fs::path(o.out) / name, std::ios::binary | std::ios::trunc);
    if (!f || !(f << text)) throw Error(ErrorCode::IoError, std::string("cannot write ") + name);
  };
  write("time_pcc.csv", time_pcc_csv(r));
  write("tracking.csv", tracking_csv(r));
  std::size_t switches = 0, within = 0;
  for (const auto& c : r.curves)
    if (c.switch_s && c.crossover_s) {
      ++switches;
      within += std::abs(*c.crossover_s - *c.switch_s) <= 2.0 ? 1 : 0;
    }
  out << "model=" << to_string(cfg.model) << " trials=" << r.curves.size() << " switches=" << switches
      << " crossover_within_2s=" << within << "\n";
  return kExitOk;
}

int cmd_preprocess(const std::string& manifest, const std::string& config_path, const std::string& out_dir,
                   std::ostream& out) {
  Session s = load_session(manifest);
  PreprocessOptions opt;
  std::optional<std::string> ref_name;
  if (!config_path.empty()) {
    json j;
    try {
      j = json::parse(read_file(config_path));
      for (const auto& [k, v] : j.items()) {
        if (k == "reference_channel") ref_name = v.get<std::string>();
        else if (k == "drop_reference") opt.drop_reference = v.get<bool>();
        else if (k == "band_low_hz") opt.band_low_hz = v.get<double>();
        else if (k == "band_high_hz") opt.band_high_hz = v.get<double>();
        else if (k == "band_order") opt.band_order = v.get<int>();
        else if (k == "notch_low_hz") opt.notch_low_hz = v.get<double>();
        else if (k == "notch_high_hz") opt.notch_high_hz = v.get<double>();
        else if (k == "target_fs") opt.target_fs = v.get<double>();
        else throw Error(ErrorCode::BadConfig, "unknown preprocess field '" + k + "'");
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::BadConfig, std::string("preprocess config: ") + e.what());
    }
  }
  if (ref_name) {
    auto it = std::find(s.channel_names.begin(), s.channel_names.end(), *ref_name);
    if (it == s.channel_names.end()) throw Error(ErrorCode::BadChannelIndex, "unknown reference channel " + *ref_name);
    opt.reference_channel = static_cast<std::size_t>(it - s.channel_names.begin());
  }
  std::vector<std::string> names;
  for (auto& t : s.trials) {
    t.eeg.channel_names = s.channel_names;
    t.eeg = preprocess_chain(t.eeg, opt);
    names = t.eeg.channel_names;
    for (auto& sp : t.speakers) {
      if (std::abs(sp.envelope.fs - opt.target_fs) > 1e-9) {
        sp.envelope.samples = resample(sp.envelope.samples, sp.envelope.fs, opt.target_fs);
        sp.envelope.fs = opt.target_fs;
      }
      sp.envelope.samples.resize(t.eeg.length(), 0.0);
    }
  }
  s.fs = opt.target_fs;
  if (!names.empty()) s.channel_names = names;
  save_session(s, out_dir);
  out << "preprocess trials=" << s.trials.size() << " fs=" << fmt("%g", s.fs) << " out=" << out_dir << "\n";
  return kExitOk;
}

int cmd_envelope(const std::string& audio_path, const std::string& out_path, double to_fs, std::size_t bands,
                 double f_low, double f_high, std::ostream& out) {
  const AudioTrack a = read_wav(audio_path);
  const GammatoneBank bank = gammatone_bank(a.fs, f_low, f_high, bands);
  const Envelope e = compute_envelope(a, bank, to_fs);
  Matrix m(e.samples.size(), 1);
  m.set_column(0, e.samples);
  write_array(out_path, m, e.fs);
  out << "envelope samples=" << e.samples.size() << " fs=" << fmt("%g", e.fs) << "\n";
  return kExitOk;
}

// Input layout: metadata.json with subject, fs, channels and trials; each
// trial names a CSV of EEG samples (one row per sample, optional header) and
// one WAV per speaker. Arrays are converted, WAVs are copied.
int cmd_convert(const std::string& input, const std::string& out_dir, std::ostream& out) {
  const fs::path in(input);
  json meta;
  try {
    meta = json::parse(read_file(in / "metadata.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestError, std::string("metadata.json: ") + e.what());
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir);
  json manifest;
  try {
    manifest = {{"format", "aadkit-manifest"},
                {"version", 1},
                {"subject", meta.value("subject", std::string{})},
                {"fs_eeg", meta.at("fs").get<double>()},
                {"channels", meta.at("channels")},
                {"trials", json::array()}};
    const double fs_eeg = meta.at("fs").get<double>();
    const std::size_t C = meta.at("channels").size();
    for (const auto& t : meta.at("trials")) {
      const int id = t.at("id").get<int>();
      std::ifstream csv(in / t.at("eeg").get<std::string>());
      if (!csv) throw Error(ErrorCode::ManifestError, "missing EEG file for trial " + std::to_string(id));
      std::vector<double> values;
      std::size_t rows = 0;
      std::string line;
      while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ls, cell, ',')) {
          try {
            row.push_back(std::stod(cell));
          } catch (const std::exception&) {
            numeric = false;
            break;
          }
        }
        if (!numeric) {
          if (rows == 0 && values.empty()) continue;  // header
          throw Error(ErrorCode::ShapeMismatch, "non-numeric EEG value in trial " + std::to_string(id));
        }
        if (row.size() != C) throw Error(ErrorCode::ShapeMismatch, "EEG row width differs from channel count");
        values.insert(values.end(), row.begin(), row.end());
        ++rows;
      }
      Matrix m(rows, C);
      m.data() = std::move(values);
      char name[64];
      std::snprintf(name, sizeof name, "trial_%03d_eeg.aad", id);
      write_array(fs::path(out_dir) / name, m, fs_eeg);
      json jt = {{"id", id},
                 {"task", t.at("task")},
                 {"group", t.value("group", 0)},
                 {"switch_s", t.value("switch_s", 15.0)},
                 {"eeg", name},
                 {"attended", t.at("attended")},
                 {"speakers", json::array()}};
      for (const auto& sp : t.at("speakers")) {
        const fs::path wav = in / sp.at("audio").get<std::string>();
        const std::string dst = "trial_" + std::to_string(id) + "_" + wav.filename().string();
        fs::copy_file(wav, fs::path(out_dir) / dst, fs::copy_options::overwrite_existing, ec);
        if (ec) throw Error(ErrorCode::ManifestError, "cannot copy " + wav.string());
        jt["speakers"].push_back({{"id", sp.at("id")}, {"direction_deg", sp.at("direction_deg")}, {"audio", dst}});
      }
      manifest["trials"].push_back(std::move(jt));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestError, std::string("metadata.json: ") + e.what());
  }
  std::ofstream mf(fs::path(out_dir) / "manifest.json", std::ios::trunc);
  if (!mf) throw Error(ErrorCode::IoError, "cannot write manifest");
  mf << manifest.dump(2) << "\n";
  out << "convert trials=" << manifest["trials"].size() << " out=" << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Auditory attention decoding toolkit"};
  app.require_subcommand(1);

  std::string synth_config, synth_out;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic session");
  synth->add_option("--config", synth_config, "JSON synthesis configuration")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Override the configured seed");

  std::string conv_in, conv_out;
  auto* convert = app.add_subcommand("convert-dataset", "Convert a raw dataset directory into a manifest");
  convert->add_option("--input", conv_in, "Directory holding metadata.json")->required();
  convert->add_option("--out", conv_out, "Output directory")->required();

  std::string pre_manifest, pre_config, pre_out;
  auto* pre = app.add_subcommand("preprocess", "Re-reference, filter, resample and write a new session");
  pre->add_option("--manifest", pre_manifest, "Input manifest")->required();
  pre->add_option("--config", pre_config, "JSON preprocessing options");
  pre->add_option("--out", pre_out, "Output directory")->required();

  std::string env_audio, env_out;
  double env_fs = 40.0, env_low = 50.0, env_high = 5000.0;
  std::size_t env_bands = 17;
  auto* env = app.add_subcommand("envelope", "Gammatone envelope of a mono WAV file");
  env->add_option("--audio", env_audio, "Input WAV")->required();
  env->add_option("--out", env_out, "Output array")->required();
  env->add_option("--fs", env_fs, "Envelope sample rate");
  env->add_option("--bands", env_bands, "Number of gammatone bands");
  env->add_option("--f-low", env_low, "Lowest center frequency");
  env->add_option("--f-high", env_high, "Highest center frequency");

  RunOptions run_opt, ablate_opt, track_opt;
  auto* run = app.add_subcommand("run", "Cross-validated training and evaluation");
  add_run_options(run, run_opt);
  auto* ablate = app.add_subcommand("ablate", "Channel-subset evaluation");
  add_run_options(ablate, ablate_opt);
  std::string layouts = "full,left,right,upper,lower";
  ablate->add_option("--layouts", layouts, "Comma-separated layout names or a JSON file");
  auto* track = app.add_subcommand("track", "Time-resolved PCC curves");
  add_run_options(track, track_opt);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();  // program name
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error[config]: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (synth->parsed())
      return cmd_synth(synth_config, synth_out,
                       synth->count("--seed") ? std::optional<std::uint64_t>(synth_seed) : std::nullopt, out);
    if (convert->parsed()) return cmd_convert(conv_in, conv_out, out);
    if (pre->parsed()) return cmd_preprocess(pre_manifest, pre_config, pre_out, out);
    if (env->parsed()) return cmd_envelope(env_audio, env_out, env_fs, env_bands, env_low, env_high, out);
    if (run->parsed()) return cmd_run(run_opt, out);
    if (ablate->parsed()) return cmd_ablate(ablate_opt, layouts, out);
    if (track->parsed()) return cmd_track(track_opt, out);
  } catch (const Error& e) {
    const ErrorCategory c = category_of(e.code());
    err << "error[" << category_name(c) << "]: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code(c);
  } catch (const fs::filesystem_error& e) {
    err << "error[io]: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitConfig;
}

}  // namespace aad
