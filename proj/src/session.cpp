#include "aad/session.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"

namespace aad {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<std::size_t> Trial::slot_of(int speaker_id) const {
  for (std::size_t s = 0; s < speakers.size(); ++s)
    if (speakers[s].id == speaker_id) return s;
  return std::nullopt;
}

int direction_class(double direction_deg) {
  if (direction_deg < -1e-9) return 0;
  if (direction_deg > 1e-9) return 2;
  return 1;
}

std::vector<std::string> default_channel_names(std::size_t n) {
  std::vector<std::string> names;
  if (n == 16) {
    for (int i = 1; i <= 8; ++i) names.push_back("L" + std::to_string(i));
    for (int i = 1; i <= 8; ++i) names.push_back("R" + std::to_string(i));
    return names;
  }
  for (std::size_t i = 1; i <= n; ++i) names.push_back("E" + std::to_string(i));
  return names;
}

std::vector<Span> build_timeline(int task, double duration_s, double switch_s, const std::vector<int>& attended) {
  if (task < 1 || task > 7) throw Error(ErrorCode::UnknownTask, "task must be in 1..7, got " + std::to_string(task));
  if (attended.empty()) throw Error(ErrorCode::ManifestError, "trial has no attended speaker");
  if (task == 1 || task == 7) return {{0.0, duration_s, attended[0]}};
  if (!(switch_s > 0.0 && switch_s < duration_s))
    throw Error(ErrorCode::ManifestError, "switch time must lie inside the trial");
  std::optional<int> second;
  switch (task) {
    case 2:
    case 5:
    case 6:
      if (attended.size() < 2)
        throw Error(ErrorCode::ManifestError, "task " + std::to_string(task) + " needs a post-switch speaker");
      second = attended[1];
      break;
    case 3:
      if (attended.size() >= 2) second = attended[1];
      break;
    default:
      break;
  }
  return {{0.0, switch_s, attended[0]}, {switch_s, duration_s, second}};
}

void validate_trial(const Trial& trial) {
  validate(trial.eeg);
  if (trial.speakers.size() < 2 || trial.speakers.size() > 3)
    throw Error(ErrorCode::ShapeMismatch, "trial must have two or three speakers");
  std::set<double> dirs;
  std::set<int> ids;
  for (const auto& s : trial.speakers) {
    if (s.envelope.samples.size() != trial.eeg.length())
      throw Error(ErrorCode::ShapeMismatch, "envelope length differs from EEG length");
    dirs.insert(s.direction_deg);
    ids.insert(s.id);
  }
  if (dirs.size() != trial.speakers.size()) throw Error(ErrorCode::ManifestError, "speaker directions must be distinct");
  if (ids.size() != trial.speakers.size()) throw Error(ErrorCode::ManifestError, "speaker ids must be distinct");
  if (trial.timeline.empty()) throw Error(ErrorCode::ManifestError, "empty timeline");
  double cursor = 0.0;
  for (const auto& span : trial.timeline) {
    if (std::abs(span.start_s - cursor) > 1e-9 || !(span.end_s > span.start_s))
      throw Error(ErrorCode::ManifestError, "timeline spans must be contiguous and ordered");
    if (span.attended && !trial.slot_of(*span.attended))
      throw Error(ErrorCode::ManifestError, "timeline names a speaker absent from the trial");
    cursor = span.end_s;
  }
  if (std::abs(cursor - trial.duration_s()) > 1.0 / trial.eeg.fs)
    throw Error(ErrorCode::ManifestError, "timeline does not cover the trial");
}

AttendedStreams build_attended_streams(const Trial& trial, const std::vector<Vector>& speaker_signals) {
  const std::size_t n = trial.eeg.length();
  const std::size_t n_spk = trial.speakers.size();
  if (speaker_signals.size() != n_spk) throw Error(ErrorCode::DimensionMismatch, "one signal per speaker expected");
  for (const auto& s : speaker_signals)
    if (s.size() != n) throw Error(ErrorCode::LengthMismatch, "speaker signal length differs from EEG");

  // Slots ordered by ascending speaker id.
  std::vector<std::size_t> by_id(n_spk);
  for (std::size_t i = 0; i < n_spk; ++i) by_id[i] = i;
  std::sort(by_id.begin(), by_id.end(),
            [&](std::size_t a, std::size_t b) { return trial.speakers[a].id < trial.speakers[b].id; });

  AttendedStreams out;
  out.attended.assign(n, 0.0);
  out.unattended.assign(n_spk - 1, Vector(n, 0.0));
  out.defined.assign(n, false);
  out.role_slot.assign(n_spk, std::vector<int>(n, -1));
  out.direction_class.assign(n, -1);

  std::size_t span_idx = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double time_s = static_cast<double>(t) / trial.eeg.fs;
    while (span_idx + 1 < trial.timeline.size() && time_s >= trial.timeline[span_idx].end_s) ++span_idx;
    const auto& span = trial.timeline[span_idx];
    std::optional<std::size_t> att;
    if (span.attended) att = trial.slot_of(*span.attended);
    std::size_t role = 1;
    if (att) {
      out.attended[t] = speaker_signals[*att][t];
      out.defined[t] = true;
      out.role_slot[0][t] = static_cast<int>(*att);
      out.direction_class[t] = direction_class(trial.speakers[*att].direction_deg);
    }
    for (std::size_t slot : by_id) {
      if (att && slot == *att) continue;
      if (role >= n_spk) break;
      out.unattended[role - 1][t] = speaker_signals[slot][t];
      out.role_slot[role][t] = static_cast<int>(slot);
      ++role;
    }
  }
  return out;
}

AttendedStreams build_attended_streams(const Trial& trial) {
  std::vector<Vector> signals;
  for (const auto& s : trial.speakers) signals.push_back(s.envelope.samples);
  return build_attended_streams(trial, signals);
}

// ---------------------------------------------------------------------------
// Binary arrays

namespace {

constexpr char kMagic[4] = {'A', 'A', 'D', 'K'};
constexpr std::size_t kHeaderBytes = 32;

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

void write_array(const fs::path& path, const Matrix& data, double fs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(kMagic, 4);
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(data.rows()));
  put_u32(out, static_cast<std::uint32_t>(data.cols()));
  put_u32(out, static_cast<std::uint32_t>(std::llround(fs * 1000.0)));
  for (int i = 0; i < 3; ++i) put_u32(out, 0);
  for (double v : data.data()) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

Matrix read_array(const fs::path& path, ArrayHeader* header) {
  const auto bytes = read_bytes(path);
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error(ErrorCode::ShapeMismatch, path.string() + ": not an AADK array");
  ArrayHeader h;
  h.version = get_u32(bytes.data() + 4);
  h.rows = get_u32(bytes.data() + 8);
  h.cols = get_u32(bytes.data() + 12);
  h.fs = get_u32(bytes.data() + 16) / 1000.0;
  if (h.version != 1) throw Error(ErrorCode::ShapeMismatch, path.string() + ": unsupported array version");
  const std::size_t expected = kHeaderBytes + static_cast<std::size_t>(h.rows) * h.cols * 4;
  if (bytes.size() != expected)
    throw Error(ErrorCode::ShapeMismatch, path.string() + ": header shape disagrees with payload length");
  Matrix m(h.rows, h.cols);
  const unsigned char* p = bytes.data() + kHeaderBytes;
  for (double& v : m.data()) {
    const std::uint32_t bits = get_u32(p);
    float f;
    std::memcpy(&f, &bits, 4);
    v = f;
    p += 4;
  }
  if (header) *header = h;
  return m;
}

// ---------------------------------------------------------------------------
// WAV

AudioTrack read_wav(const fs::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw Error(ErrorCode::ShapeMismatch, path.string() + ": not a RIFF/WAVE file");
  std::uint32_t rate = 0;
  unsigned channels = 0, bits = 0, format = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = get_u32(bytes.data() + pos + 4);
    const unsigned char* body = bytes.data() + pos + 8;
    if (pos + 8 + len > bytes.size()) throw Error(ErrorCode::ShapeMismatch, path.string() + ": truncated chunk");
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0 && len >= 16) {
      format = body[0] | (body[1] << 8);
      channels = body[2] | (body[3] << 8);
      rate = get_u32(body + 4);
      bits = body[14] | (body[15] << 8);
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      data = body;
      data_len = len;
    }
    pos += 8 + len + (len & 1);
  }
  if (!data || rate == 0) throw Error(ErrorCode::ShapeMismatch, path.string() + ": missing fmt or data chunk");
  if ((format != 1 && format != 0xFFFE) || channels != 1 || (bits != 16 && bits != 24))
    throw Error(ErrorCode::ShapeMismatch, path.string() + ": only mono 16/24-bit PCM is supported");
  const std::size_t width = bits / 8;
  AudioTrack a;
  a.fs = rate;
  a.samples.resize(data_len / width);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const unsigned char* s = data + i * width;
    std::int32_t v;
    if (width == 2) {
      v = static_cast<std::int16_t>(s[0] | (s[1] << 8));
      a.samples[i] = v / 32768.0;
    } else {
      v = static_cast<std::int32_t>((s[0] << 8) | (s[1] << 16) | (s[2] << 24)) >> 8;
      a.samples[i] = v / 8388608.0;
    }
  }
  return a;
}

void write_wav(const fs::path& path, const AudioTrack& audio) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  const auto n = static_cast<std::uint32_t>(audio.samples.size());
  const auto rate = static_cast<std::uint32_t>(std::llround(audio.fs));
  out.write("RIFF", 4);
  put_u32(out, 36 + 2 * n);
  out.write("WAVEfmt ", 8);
  put_u32(out, 16);
  put_u32(out, 1u | (1u << 16));  // PCM, mono
  put_u32(out, rate);
  put_u32(out, rate * 2);
  put_u32(out, 2u | (16u << 16));  // block align, bits
  out.write("data", 4);
  put_u32(out, 2 * n);
  for (double v : audio.samples) {
    const auto q = static_cast<std::int16_t>(std::clamp(std::lround(v * 32767.0), -32768L, 32767L));
    const char b[2] = {static_cast<char>(q & 0xff), static_cast<char>((q >> 8) & 0xff)};
    out.write(b, 2);
  }
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw Error(ErrorCode::ManifestError, where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ManifestError, where + ": field '" + key + "' has the wrong type");
  }
}

Matrix read_referenced(const fs::path& path, ArrayHeader& h) {
  if (!fs::exists(path)) throw Error(ErrorCode::ManifestError, "referenced file does not exist: " + path.string());
  return read_array(path, &h);
}

}  // namespace

Session load_session(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorCode::ManifestError, "cannot open manifest " + manifest.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestError, std::string("manifest is not valid JSON: ") + e.what());
  }
  const fs::path base = manifest.parent_path();
  Session s;
  s.subject = j.value("subject", std::string{});
  s.fs = field<double>(j, "fs_eeg", "manifest");
  if (!(s.fs > 0.0)) throw Error(ErrorCode::ManifestError, "fs_eeg must be positive");
  s.channel_names = field<std::vector<std::string>>(j, "channels", "manifest");
  const auto trials = field<json>(j, "trials", "manifest");
  if (!trials.is_array()) throw Error(ErrorCode::ManifestError, "'trials' must be an array");

  std::optional<GammatoneBank> bank;
  for (const auto& jt : trials) {
    Trial t;
    const std::string where = "trial " + jt.value("id", json(-1)).dump();
    t.id = field<int>(jt, "id", where);
    t.task = field<int>(jt, "task", where);
    if (t.task < 1 || t.task > 7) throw Error(ErrorCode::UnknownTask, where + ": unknown task " + std::to_string(t.task));
    t.group = jt.value("group", 0);
    t.switch_s = jt.value("switch_s", 15.0);

    ArrayHeader h;
    t.eeg.samples = read_referenced(base / field<std::string>(jt, "eeg", where), h);
    t.eeg.fs = h.fs;
    t.eeg.channel_names = s.channel_names;
    if (h.cols != s.channel_names.size())
      throw Error(ErrorCode::ShapeMismatch, where + ": EEG channel count differs from manifest");
    if (std::abs(h.fs - s.fs) > 1e-3) throw Error(ErrorCode::ShapeMismatch, where + ": EEG sample rate differs from fs_eeg");
    const std::size_t t_len = t.eeg.length();

    for (const auto& js : field<json>(jt, "speakers", where)) {
      SpeakerStream sp;
      sp.id = field<int>(js, "id", where);
      sp.direction_deg = field<double>(js, "direction_deg", where);
      if (js.contains("envelope")) {
        ArrayHeader eh;
        const Matrix e = read_referenced(base / js.at("envelope").get<std::string>(), eh);
        if (eh.cols != 1 || eh.rows != t_len)
          throw Error(ErrorCode::ShapeMismatch, where + ": envelope shape differs from EEG");
        if (std::abs(eh.fs - s.fs) > 1e-3) throw Error(ErrorCode::ShapeMismatch, where + ": envelope rate differs from EEG");
        sp.envelope = {e.column(0), s.fs};
      } else if (js.contains("audio")) {
        const fs::path wav = base / js.at("audio").get<std::string>();
        if (!fs::exists(wav)) throw Error(ErrorCode::ManifestError, "referenced file does not exist: " + wav.string());
        AudioTrack a = read_wav(wav);
        a.speaker_id = sp.id;
        // Low-rate recordings keep the bank below Nyquist.
        if (!bank || bank->fs != a.fs) bank = gammatone_bank(a.fs, 50.0, std::min(5000.0, 0.45 * a.fs), 17);
        sp.envelope = compute_envelope(a, *bank, s.fs);
        sp.envelope.samples.resize(t_len, 0.0);
      } else {
        throw Error(ErrorCode::ManifestError, where + ": speaker needs 'envelope' or 'audio'");
      }
      t.speakers.push_back(std::move(sp));
    }
    t.timeline = build_timeline(t.task, t.duration_s(), t.switch_s, field<std::vector<int>>(jt, "attended", where));
    validate_trial(t);
    s.trials.push_back(std::move(t));
  }
  return s;
}

void save_session(const Session& session, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
  json j;
  j["format"] = "aadkit-manifest";
  j["version"] = 1;
  j["subject"] = session.subject;
  j["fs_eeg"] = session.fs;
  j["channels"] = session.channel_names;
  j["trials"] = json::array();
  char name[64];
  for (const auto& t : session.trials) {
    json jt;
    jt["id"] = t.id;
    jt["task"] = t.task;
    jt["group"] = t.group;
    jt["switch_s"] = t.switch_s;
    std::snprintf(name, sizeof name, "trial_%03d_eeg.aad", t.id);
    write_array(dir / name, t.eeg.samples, t.eeg.fs);
    jt["eeg"] = name;
    std::vector<int> attended;
    for (const auto& span : t.timeline)
      if (span.attended) attended.push_back(*span.attended);
    if (attended.empty()) throw Error(ErrorCode::ManifestError, "trial without an attended speaker");
    if (t.task == 1 || t.task == 7) attended.resize(1);
    jt["attended"] = attended;
    jt["speakers"] = json::array();
    for (const auto& sp : t.speakers) {
      std::snprintf(name, sizeof name, "trial_%03d_spk%d.aad", t.id, sp.id);
      Matrix m(sp.envelope.samples.size(), 1);
      m.set_column(0, sp.envelope.samples);
      write_array(dir / name, m, sp.envelope.fs);
      jt["speakers"].push_back({{"id", sp.id}, {"direction_deg", sp.direction_deg}, {"envelope", name}});
    }
    j["trials"].push_back(std::move(jt));
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write manifest in " + dir.string());
  out << j.dump(2) << "\n";
}

}  // namespace aad
