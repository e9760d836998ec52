#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aad/envelope.hpp"
#include "aad/design.hpp"
#include "aad/preprocess.hpp"

namespace aad {

// Half-open time span [start_s, end_s) with the attended speaker id, or
// nullopt when the listener ignores every speaker.
struct Span {
  double start_s = 0.0;
  double end_s = 0.0;
  std::optional<int> attended;
};

struct SpeakerStream {
  int id = 0;
  double direction_deg = 0.0;
  Envelope envelope;
};

struct Trial {
  int id = 0;
  int task = 1;
  int group = 0;
  double switch_s = 15.0;
  MultichannelSignal eeg;
  std::vector<SpeakerStream> speakers;
  std::vector<Span> timeline;

  double duration_s() const { return static_cast<double>(eeg.length()) / eeg.fs; }
  std::optional<std::size_t> slot_of(int speaker_id) const;
};

struct Session {
  std::string subject;
  double fs = 0.0;
  std::vector<std::string> channel_names;
  std::vector<Trial> trials;
};

// Directions used by the loudspeaker array.
inline constexpr double kDirections[] = {-120.0, -60.0, 0.0, 60.0, 120.0};

// Spatial class of a direction: 0 left, 1 front, 2 right.
int direction_class(double direction_deg);

// cEEGrid channel labels L1–L8, R1–R8 for 16 channels, E1… otherwise.
std::vector<std::string> default_channel_names(std::size_t n);

// Attention timeline from the task instructions:
//  1, 7: one span; 2, 5, 6: switch to attended[1]; 3: attended[1] when
//  known, otherwise ignore; 4: ignore after the switch.
std::vector<Span> build_timeline(int task, double duration_s, double switch_s, const std::vector<int>& attended);

// Checks contiguity over [0, duration], ordering and speaker membership.
void validate_trial(const Trial& trial);

struct AttendedStreams {
  Vector attended;                       // composite; zero where undefined
  std::vector<Vector> unattended;        // ordered by ascending speaker id
  RowMask defined;                       // attended speaker known at t
  std::vector<std::vector<int>> role_slot;  // [role][t] speaker slot; role 0 = attended
  std::vector<int> direction_class;      // class of the attended direction, −1 if undefined
};

// Piecewise composites of the given per-speaker signals (defaults to the
// stored envelopes) following the trial timeline.
AttendedStreams build_attended_streams(const Trial& trial);
AttendedStreams build_attended_streams(const Trial& trial, const std::vector<Vector>& speaker_signals);

// ---------------------------------------------------------------------------
// Binary arrays: 32-byte header ("AADK", version, T, C, fs·1000, 3 reserved),
// all little-endian uint32, followed by T·C float32 values in time-major order.

struct ArrayHeader {
  std::uint32_t version = 1;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  double fs = 0.0;
};

void write_array(const std::filesystem::path& path, const Matrix& data, double fs);
Matrix read_array(const std::filesystem::path& path, ArrayHeader* header = nullptr);

// Mono PCM WAV (16 or 24 bit).
AudioTrack read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioTrack& audio);

Session load_session(const std::filesystem::path& manifest);
// Writes manifest.json plus one array per EEG recording and per envelope.
void save_session(const Session& session, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Synthetic sessions with a known forward model.

struct SynthConfig {
  std::size_t n_trials = 20;
  double duration_s = 30.0;
  double fs = 40.0;
  std::size_t n_channels = 16;
  std::size_t n_speakers = 3;
  std::size_t kernel_lags = 8;
  double snr = 5.0;
  double interference_gain = 0.5;
  double switch_s = 15.0;
  std::vector<int> tasks = {1};
  double envelope_cutoff_hz = 4.0;
  std::vector<std::size_t> signal_channels;  // empty → every channel
  double direction_gain = 0.0;
  std::uint64_t seed = 1;
};

void validate(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const std::string& text);
std::string synth_config_to_json(const SynthConfig& cfg);

Session synth_generate(const SynthConfig& cfg);

// Replaces each trial's attended labels through a random permutation of its speakers.
Session shuffle_attended_labels(const Session& session, std::uint64_t seed);

}  // namespace aad
