#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "aad/numerics.hpp"

namespace aad {

// Time-major multichannel recording: samples(t, c).
struct MultichannelSignal {
  Matrix samples;
  double fs = 0.0;
  std::vector<std::string> channel_names;

  std::size_t length() const noexcept { return samples.rows(); }
  std::size_t channels() const noexcept { return samples.cols(); }
};

// Checks fs > 0, T ≥ 1, finite samples and matching channel names.
void validate(const MultichannelSignal& x);

// b0 + b1 z^-1 + b2 z^-2 over 1 + a1 z^-1 + a2 z^-2.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

struct IirCascade {
  std::vector<Biquad> sections;
  std::string design_label;

  std::complex<double> response(double freq_hz, double fs) const;
  double gain_db(double freq_hz, double fs) const;
  // Largest pole magnitude over all sections.
  double max_pole_magnitude() const;
};

// `order` is the total filter order (number of poles); the analog
// low-pass prototype has order/2 poles.
IirCascade design_bandpass(double low_hz, double high_hz, int order, double fs);
IirCascade design_notch(double stop_low_hz, double stop_high_hz, double fs, int order = 4);
IirCascade design_lowpass(double cutoff_hz, int order, double fs);

// Causal per-channel filtering with zero initial state.
MultichannelSignal filter_apply(const MultichannelSignal& x, const IirCascade& f);
Vector filter_apply(std::span<const double> x, const IirCascade& f);

MultichannelSignal rereference(const MultichannelSignal& x, std::size_t ref_index,
                               bool drop_ref = false);

// Polyphase rational resampling with a Kaiser-windowed anti-alias FIR.
MultichannelSignal resample(const MultichannelSignal& x, double to_fs);
Vector resample(std::span<const double> x, double fs, double to_fs);

// Per-channel z-score with sample standard deviation; constant channels become zeros.
MultichannelSignal zscore(const MultichannelSignal& x);
Vector zscore(std::span<const double> x);

struct PreprocessOptions {
  std::optional<std::size_t> reference_channel;
  bool drop_reference = true;
  double band_low_hz = 0.5;
  double band_high_hz = 62.0;
  int band_order = 8;
  double notch_low_hz = 48.0;
  double notch_high_hz = 52.0;
  double target_fs = 40.0;
};

// rereference → bandpass → notch → resample → zscore.
MultichannelSignal preprocess_chain(const MultichannelSignal& x, const PreprocessOptions& opt);

}  // namespace aad
