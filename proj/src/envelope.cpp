#include "aad/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aad/preprocess.hpp"

namespace aad {

using cplx = std::complex<double>;

double erb_hz(double f_hz) { return 24.7 * (4.37 * f_hz / 1000.0 + 1.0); }

double erb_rate(double f_hz) { return 21.4 * std::log10(1.0 + 0.00437 * f_hz); }

double erb_rate_inverse(double rate) { return (std::pow(10.0, rate / 21.4) - 1.0) / 0.00437; }

GammatoneBank gammatone_bank(double fs, double f_low, double f_high, std::size_t n_bands, double erb_scale) {
  if (!(f_low > 0.0) || !(f_low < f_high) || !(f_high < fs / 2.0))
    throw Error(ErrorCode::InvalidBand, "gammatone edges must satisfy 0 < f_low < f_high < fs/2");
  if (n_bands < 1) throw Error(ErrorCode::InvalidBand, "gammatone bank needs at least one band");
  if (!(erb_scale > 0.0)) throw Error(ErrorCode::BadConfig, "erb scale must be positive");

  GammatoneBank bank;
  bank.fs = fs;
  const double lo = erb_rate(f_low);
  const double hi = erb_rate(f_high);
  for (std::size_t k = 0; k < n_bands; ++k) {
    const double rate =
        n_bands == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n_bands - 1);
    const double fc = std::clamp(erb_rate_inverse(rate), f_low, f_high);
    bank.channels.push_back({fc, erb_scale * erb_hz(fc)});
  }
  return bank;
}

namespace {

struct Resonator {
  cplx pole;
  double gain;
};

Resonator resonator(const GammatoneChannel& ch, double fs) {
  const double r = std::exp(-2.0 * std::numbers::pi * ch.bandwidth_hz / fs);
  return {std::polar(r, 2.0 * std::numbers::pi * ch.center_hz / fs), 1.0 - r};
}

constexpr int kStages = 4;

}  // namespace

cplx GammatoneBank::response(std::size_t k, double freq_hz) const {
  const Resonator res = resonator(channels.at(k), fs);
  const cplx zinv = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / fs);
  return std::pow(res.gain / (1.0 - res.pole * zinv), kStages);
}

std::vector<cplx> GammatoneBank::filter(std::size_t k, std::span<const double> x) const {
  const Resonator res = resonator(channels.at(k), fs);
  std::vector<cplx> y(x.begin(), x.end());
  for (int stage = 0; stage < kStages; ++stage) {
    cplx state = 0.0;
    for (cplx& v : y) {
      state = res.gain * v + res.pole * state;
      v = state;
    }
  }
  return y;
}

Envelope compute_envelope(const AudioTrack& audio, const GammatoneBank& bank, double to_fs) {
  if (audio.fs != bank.fs) throw Error(ErrorCode::BadConfig, "gammatone bank designed for a different sample rate");
  Vector summed(audio.samples.size(), 0.0);
  for (std::size_t k = 0; k < bank.channels.size(); ++k) {
    const auto band = bank.filter(k, audio.samples);
    for (std::size_t i = 0; i < band.size(); ++i) summed[i] += std::pow(std::abs(band[i]), bank.compression);
  }
  Envelope env{resample(summed, audio.fs, to_fs), to_fs};
  for (double& v : env.samples) v = std::max(v, 0.0);
  return env;
}

}  // namespace aad
