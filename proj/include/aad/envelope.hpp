#pragma once

#include <complex>
#include <string>
#include <vector>

#include "aad/numerics.hpp"

namespace aad {

struct AudioTrack {
  Vector samples;
  double fs = 0.0;
  int speaker_id = 0;
};

struct Envelope {
  Vector samples;
  double fs = 0.0;
};

// One 4th-order gammatone channel realised as four identical complex
// one-pole resonators.
struct GammatoneChannel {
  double center_hz = 0.0;
  double bandwidth_hz = 0.0;
};

struct GammatoneBank {
  double fs = 0.0;
  std::vector<GammatoneChannel> channels;
  double compression = 0.6;

  // Complex response of channel k at freq_hz (unit gain at its center).
  std::complex<double> response(std::size_t k, double freq_hz) const;
  // Complex channel output for real input.
  std::vector<std::complex<double>> filter(std::size_t k, std::span<const double> x) const;
};

double erb_hz(double f_hz);
double erb_rate(double f_hz);
double erb_rate_inverse(double rate);

// Center frequencies evenly spaced on the ERB-rate scale; bandwidth = erb_scale · ERB(fc).
GammatoneBank gammatone_bank(double fs, double f_low, double f_high, std::size_t n_bands,
                             double erb_scale = 1.019);

// Σ_bands |band|^compression, resampled to to_fs and clamped at zero.
Envelope compute_envelope(const AudioTrack& audio, const GammatoneBank& bank, double to_fs);

}  // namespace aad
