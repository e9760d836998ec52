#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "aad/session.hpp"
#include "json.hpp"

namespace aad {

using nlohmann::json;

namespace {

enum Stream : std::uint32_t { kKernels = 1, kTrialMeta = 2, kEnvelope = 3, kNoise = 4, kDirection = 5, kShuffle = 6 };

std::mt19937_64 substream(std::uint64_t seed, std::uint32_t tag, std::uint32_t index, std::uint32_t sub = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag, index, sub};
  return std::mt19937_64(seq);
}

// Unit-norm random kernel per channel with an exponential taper.
Matrix draw_kernels(std::mt19937_64& rng, std::size_t channels, std::size_t lags,
                    const std::vector<bool>& active) {
  std::normal_distribution<double> n01;
  Matrix h(channels, lags);
  for (std::size_t c = 0; c < channels; ++c) {
    double ss = 0.0;
    for (std::size_t l = 0; l < lags; ++l) {
      h(c, l) = n01(rng) * std::exp(-static_cast<double>(l) / (0.5 * static_cast<double>(lags)));
      ss += h(c, l) * h(c, l);
    }
    const double scale = active[c] && ss > 0.0 ? 1.0 / std::sqrt(ss) : 0.0;
    for (std::size_t l = 0; l < lags; ++l) h(c, l) *= scale;
  }
  return h;
}

Vector convolve_causal(std::span<const double> x, std::span<const double> h) {
  Vector y(x.size(), 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double acc = 0.0;
    for (std::size_t l = 0; l < h.size() && l <= t; ++l) acc += h[l] * x[t - l];
    y[t] = acc;
  }
  return y;
}

Vector smooth_noise(std::mt19937_64& rng, std::size_t n, std::size_t burn, const IirCascade& lp, bool rectify) {
  std::normal_distribution<double> n01;
  Vector raw(n + burn);
  for (double& v : raw) v = rectify ? std::pow(std::abs(n01(rng)), 0.6) : n01(rng);
  Vector f = filter_apply(raw, lp);
  return Vector(f.begin() + static_cast<std::ptrdiff_t>(burn), f.end());
}

}  // namespace

void validate(const SynthConfig& c) {
  auto bad = [](const std::string& field, const std::string& what) {
    throw Error(ErrorCode::BadConfig, "field '" + field + "' " + what);
  };
  if (c.n_trials < 1) bad("n_trials", "must be at least 1");
  if (!(c.fs > 0.0)) bad("fs", "must be positive");
  if (!(c.duration_s > 0.0) || c.duration_s * c.fs < 2.0) bad("duration_s", "must cover at least two samples");
  if (c.n_channels < 1) bad("n_channels", "must be at least 1");
  if (c.n_speakers < 2 || c.n_speakers > 3) bad("n_speakers", "must be 2 or 3");
  if (c.kernel_lags < 1) bad("kernel_lags", "must be at least 1");
  if (!(c.snr > 0.0)) bad("snr", "must be > 0");
  if (!(c.interference_gain >= 0.0)) bad("interference_gain", "must be >= 0");
  if (c.tasks.empty()) bad("tasks", "must not be empty");
  for (int t : c.tasks)
    if (t < 1 || t > 7) bad("tasks", "entries must be in 1..7");
  bool needs_switch = false;
  for (int t : c.tasks) needs_switch |= (t != 1 && t != 7);
  if (needs_switch && !(c.switch_s > 0.0 && c.switch_s < c.duration_s)) bad("switch_s", "must lie inside the trial");
  if (!(c.envelope_cutoff_hz > 0.0 && c.envelope_cutoff_hz < 0.5 * c.fs))
    bad("envelope_cutoff_hz", "must lie in (0, fs/2)");
  for (std::size_t ch : c.signal_channels)
    if (ch >= c.n_channels) bad("signal_channels", "index out of range");
  if (!(c.direction_gain >= 0.0)) bad("direction_gain", "must be >= 0");
  if (c.direction_gain > 0.0 && c.fs <= 24.0) bad("direction_gain", "needs fs > 24 Hz for the 8-12 Hz source");
}

SynthConfig synth_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::BadConfig, "config must be a JSON object");
  SynthConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "n_trials") c.n_trials = value.get<std::size_t>();
      else if (key == "duration_s") c.duration_s = value.get<double>();
      else if (key == "fs") c.fs = value.get<double>();
      else if (key == "n_channels") c.n_channels = value.get<std::size_t>();
      else if (key == "n_speakers") c.n_speakers = value.get<std::size_t>();
      else if (key == "kernel_lags") c.kernel_lags = value.get<std::size_t>();
      else if (key == "snr") c.snr = value.get<double>();
      else if (key == "interference_gain") c.interference_gain = value.get<double>();
      else if (key == "switch_s") c.switch_s = value.get<double>();
      else if (key == "tasks") c.tasks = value.get<std::vector<int>>();
      else if (key == "envelope_cutoff_hz") c.envelope_cutoff_hz = value.get<double>();
      else if (key == "signal_channels") c.signal_channels = value.get<std::vector<std::size_t>>();
      else if (key == "direction_gain") c.direction_gain = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw Error(ErrorCode::BadConfig, "unknown field '" + key + "'");
    } catch (const json::exception&) {
      throw Error(ErrorCode::BadConfig, "field '" + key + "' has the wrong type");
    }
    if ((key == "n_trials" || key == "n_channels" || key == "n_speakers" || key == "kernel_lags" || key == "seed") &&
        !value.is_number_unsigned())
      throw Error(ErrorCode::BadConfig, "field '" + key + "' must be a nonnegative integer");
  }
  validate(c);
  return c;
}

std::string synth_config_to_json(const SynthConfig& c) {
  json j = {{"n_trials", c.n_trials},
            {"duration_s", c.duration_s},
            {"fs", c.fs},
            {"n_channels", c.n_channels},
            {"n_speakers", c.n_speakers},
            {"kernel_lags", c.kernel_lags},
            {"snr", c.snr},
            {"interference_gain", c.interference_gain},
            {"switch_s", c.switch_s},
            {"tasks", c.tasks},
            {"envelope_cutoff_hz", c.envelope_cutoff_hz},
            {"signal_channels", c.signal_channels},
            {"direction_gain", c.direction_gain},
            {"seed", c.seed}};
  return j.dump(2);
}

Session synth_generate(const SynthConfig& cfg) {
  validate(cfg);
  const std::size_t n = static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.fs));
  const std::size_t burn = static_cast<std::size_t>(std::llround(2.0 * cfg.fs));
  const std::size_t C = cfg.n_channels;

  std::vector<bool> active(C, cfg.signal_channels.empty());
  for (std::size_t c : cfg.signal_channels) active[c] = true;

  auto krng = substream(cfg.seed, kKernels, 0);
  const Matrix h_att = draw_kernels(krng, C, cfg.kernel_lags, active);
  const Matrix h_int = draw_kernels(krng, C, cfg.kernel_lags, active);
  std::normal_distribution<double> n01;
  std::vector<Vector> patterns(3, Vector(C));
  for (auto& p : patterns) {
    for (double& v : p) v = n01(krng);
    const double nrm = norm2(p);
    for (double& v : p) v *= std::sqrt(static_cast<double>(C)) / nrm;
  }

  const IirCascade env_lp = design_lowpass(cfg.envelope_cutoff_hz, 2, cfg.fs);
  std::optional<IirCascade> alpha_bp;
  if (cfg.direction_gain > 0.0) alpha_bp = design_bandpass(8.0, 12.0, 4, cfg.fs);

  Session s;
  s.subject = "synth-" + std::to_string(cfg.seed);
  s.fs = cfg.fs;
  s.channel_names = default_channel_names(C);

  for (std::size_t i = 0; i < cfg.n_trials; ++i) {
    const auto idx = static_cast<std::uint32_t>(i);
    Trial t;
    t.id = static_cast<int>(i);
    t.task = cfg.tasks[i % cfg.tasks.size()];
    t.switch_s = cfg.switch_s;
    const std::size_t n_spk = t.task == 6 ? 2 : cfg.n_speakers;
    const int id_base = i % 3 == 2 ? 4 : 1;
    t.group = id_base == 1 ? 0 : 1;

    auto meta = substream(cfg.seed, kTrialMeta, idx);
    std::vector<double> dirs(std::begin(kDirections), std::end(kDirections));
    std::shuffle(dirs.begin(), dirs.end(), meta);
    std::uniform_int_distribution<std::size_t> pick(0, n_spk - 1);
    const std::size_t a0 = pick(meta);
    std::uniform_int_distribution<std::size_t> pick_other(0, n_spk - 2);
    std::size_t a1 = pick_other(meta);
    if (a1 >= a0) ++a1;

    std::vector<Vector> z;
    for (std::size_t k = 0; k < n_spk; ++k) {
      auto erng = substream(cfg.seed, kEnvelope, idx, static_cast<std::uint32_t>(k));
      Vector e = smooth_noise(erng, n, burn, env_lp, true);
      for (double& v : e) v = std::max(v, 0.0);
      z.push_back(zscore(e));
      t.speakers.push_back({id_base + static_cast<int>(k), dirs[k], {std::move(e), cfg.fs}});
    }
    t.eeg.fs = cfg.fs;
    t.eeg.channel_names = s.channel_names;
    t.eeg.samples = Matrix(n, C);
    t.timeline = build_timeline(t.task, cfg.duration_s, cfg.switch_s,
                                {t.speakers[a0].id, t.speakers[a1].id});

    const AttendedStreams streams = build_attended_streams(t, z);
    Vector mixture(n, 0.0);
    for (std::size_t tt = 0; tt < n; ++tt) {
      const int att = streams.role_slot[0][tt];
      double acc = 0.0;
      for (std::size_t k = 0; k < n_spk; ++k)
        if (static_cast<int>(k) != att) acc += z[k][tt];
      mixture[tt] = acc / static_cast<double>(att < 0 ? n_spk : n_spk - 1);
    }

    Vector source;
    if (alpha_bp) {
      auto drng = substream(cfg.seed, kDirection, idx);
      source = zscore(smooth_noise(drng, n, burn, *alpha_bp, false));
    }

    auto nrng = substream(cfg.seed, kNoise, idx);
    for (std::size_t c = 0; c < C; ++c) {
      const Vector sig = convolve_causal(streams.attended, h_att.row(c));
      const Vector intf = convolve_causal(mixture, h_int.row(c));
      for (std::size_t tt = 0; tt < n; ++tt) {
        double v = cfg.snr * sig[tt] + cfg.interference_gain * intf[tt] + n01(nrng);
        if (alpha_bp && active[c]) {
          const int cls = streams.direction_class[tt];
          if (cls >= 0) v += cfg.direction_gain * patterns[static_cast<std::size_t>(cls)][c] * source[tt];
        }
        t.eeg.samples(tt, c) = v;
      }
    }
    s.trials.push_back(std::move(t));
  }
  return s;
}

Session shuffle_attended_labels(const Session& session, std::uint64_t seed) {
  Session out = session;
  for (std::size_t i = 0; i < out.trials.size(); ++i) {
    Trial& t = out.trials[i];
    auto rng = substream(seed, kShuffle, static_cast<std::uint32_t>(i));
    std::vector<std::size_t> perm(t.speakers.size());
    for (std::size_t k = 0; k < perm.size(); ++k) perm[k] = k;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (auto& span : t.timeline)
      if (span.attended) span.attended = t.speakers[perm[*t.slot_of(*span.attended)]].id;
  }
  return out;
}

}  // namespace aad
