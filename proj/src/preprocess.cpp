#include "aad/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace aad {

using cplx = std::complex<double>;

void validate(const MultichannelSignal& x) {
  if (!(x.fs > 0.0)) throw Error(ErrorCode::BadConfig, "sample rate must be positive");
  if (x.length() < 1) throw Error(ErrorCode::ShapeMismatch, "signal has no samples");
  if (!x.channel_names.empty() && x.channel_names.size() != x.channels())
    throw Error(ErrorCode::ShapeMismatch, "channel name count differs from channel count");
  for (double v : x.samples.data())
    if (!std::isfinite(v)) throw Error(ErrorCode::ShapeMismatch, "signal contains non-finite samples");
}

// ---------------------------------------------------------------------------
// IIR cascade

cplx IirCascade::response(double freq_hz, double fs) const {
  const double w = 2.0 * std::numbers::pi * freq_hz / fs;
  const cplx z1 = std::polar(1.0, -w);
  const cplx z2 = z1 * z1;
  cplx h = 1.0;
  for (const auto& s : sections) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return h;
}

double IirCascade::gain_db(double freq_hz, double fs) const {
  return 20.0 * std::log10(std::abs(response(freq_hz, fs)));
}

double IirCascade::max_pole_magnitude() const {
  double m = 0.0;
  for (const auto& s : sections) {
    // Roots of z^2 + a1 z + a2.
    const cplx disc = std::sqrt(cplx(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
    m = std::max({m, std::abs((-s.a1 + disc) / 2.0), std::abs((-s.a1 - disc) / 2.0)});
  }
  return m;
}

namespace {

double prewarp(double f, double fs) { return 2.0 * fs * std::tan(std::numbers::pi * f / fs); }

cplx bilinear(cplx s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

std::vector<cplx> butter_prototype(int n) {
  std::vector<cplx> poles;
  for (int k = 0; k < n; ++k) {
    poles.push_back(std::polar(1.0, std::numbers::pi * (2.0 * k + n + 1) / (2.0 * n)));
  }
  return poles;
}

// Groups conjugate-symmetric z-plane poles into denominators (a1, a2).
// First-order leftovers come back with a2 = 0 and a single real root.
std::vector<std::pair<double, double>> pair_poles(const std::vector<cplx>& zp) {
  std::vector<std::pair<double, double>> out;
  std::vector<double> reals;
  for (const cplx& p : zp) {
    if (p.imag() > 1e-12 * std::max(1.0, std::abs(p))) {
      out.emplace_back(-2.0 * p.real(), std::norm(p));
    } else if (p.imag() >= -1e-12 * std::max(1.0, std::abs(p))) {
      reals.push_back(p.real());
    }
  }
  std::sort(reals.begin(), reals.end());
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    out.emplace_back(-(reals[i] + reals[i + 1]), reals[i] * reals[i + 1]);
  }
  if (reals.size() % 2 == 1) out.emplace_back(-reals.back(), 0.0);
  return out;
}

void normalize_gain(IirCascade& f, double freq_hz, double fs) {
  const double g = std::abs(f.response(freq_hz, fs));
  const double per = std::pow(g, -1.0 / static_cast<double>(f.sections.size()));
  for (auto& s : f.sections) {
    s.b0 *= per;
    s.b1 *= per;
    s.b2 *= per;
  }
}

void check_order(int order, bool even) {
  if (order < (even ? 2 : 1) || (even && order % 2 != 0))
    throw Error(ErrorCode::InvalidBand, "filter order must be a positive even count");
}

}  // namespace

IirCascade design_bandpass(double low_hz, double high_hz, int order, double fs) {
  if (!(fs > 0.0) || !(low_hz > 0.0) || !(low_hz < high_hz) || !(high_hz < fs / 2.0))
    throw Error(ErrorCode::InvalidBand, "band edges must satisfy 0 < low < high < fs/2");
  check_order(order, true);
  const int n = order / 2;
  const double wl = prewarp(low_hz, fs);
  const double wh = prewarp(high_hz, fs);
  const double w0 = std::sqrt(wl * wh);
  const double bw = wh - wl;

  std::vector<cplx> zp;
  for (const cplx& p : butter_prototype(n)) {
    const cplx root = std::sqrt(p * p * bw * bw - 4.0 * w0 * w0);
    zp.push_back(bilinear((p * bw + root) / 2.0, fs));
    zp.push_back(bilinear((p * bw - root) / 2.0, fs));
  }
  IirCascade f;
  f.design_label = "butterworth-bandpass";
  for (auto [a1, a2] : pair_poles(zp)) {
    Biquad s{1.0, 0.0, -1.0, a1, a2};
    // Unit gain at the section's own resonance keeps intermediate levels bounded.
    if (a1 * a1 < 4.0 * a2) {
      const double theta = std::acos(-a1 / (2.0 * std::sqrt(a2)));
      IirCascade single;
      single.sections.push_back(s);
      const double g = std::abs(single.response(theta * fs / (2.0 * std::numbers::pi), fs));
      s.b0 /= g;
      s.b2 /= g;
    }
    f.sections.push_back(s);
  }
  const double center_hz = std::atan(w0 / (2.0 * fs)) * fs / std::numbers::pi;
  normalize_gain(f, center_hz, fs);
  return f;
}

IirCascade design_notch(double stop_low_hz, double stop_high_hz, double fs, int order) {
  if (!(fs > 0.0) || !(stop_low_hz > 0.0) || !(stop_low_hz < stop_high_hz) || !(stop_high_hz < fs / 2.0))
    throw Error(ErrorCode::InvalidBand, "stop band must satisfy 0 < low < high < fs/2");
  check_order(order, true);
  const int n = order / 2;
  const double wl = prewarp(stop_low_hz, fs);
  const double wh = prewarp(stop_high_hz, fs);
  const double w0 = std::sqrt(wl * wh);
  const double bw = wh - wl;
  const double wz = 2.0 * std::atan(w0 / (2.0 * fs));

  std::vector<cplx> zp;
  for (const cplx& p : butter_prototype(n)) {
    const cplx q = bw / p;
    const cplx root = std::sqrt(q * q - 4.0 * w0 * w0);
    zp.push_back(bilinear((q + root) / 2.0, fs));
    zp.push_back(bilinear((q - root) / 2.0, fs));
  }
  IirCascade f;
  f.design_label = "butterworth-bandstop";
  for (auto [a1, a2] : pair_poles(zp)) f.sections.push_back({1.0, -2.0 * std::cos(wz), 1.0, a1, a2});
  normalize_gain(f, 0.0, fs);
  return f;
}

IirCascade design_lowpass(double cutoff_hz, int order, double fs) {
  if (!(fs > 0.0) || !(cutoff_hz > 0.0) || !(cutoff_hz < fs / 2.0))
    throw Error(ErrorCode::InvalidBand, "cutoff must satisfy 0 < f < fs/2");
  check_order(order, false);
  const double wc = prewarp(cutoff_hz, fs);
  std::vector<cplx> zp;
  for (const cplx& p : butter_prototype(order)) zp.push_back(bilinear(wc * p, fs));
  IirCascade f;
  f.design_label = "butterworth-lowpass";
  for (auto [a1, a2] : pair_poles(zp)) {
    if (a2 == 0.0)
      f.sections.push_back({1.0, 1.0, 0.0, a1, 0.0});
    else
      f.sections.push_back({1.0, 2.0, 1.0, a1, a2});
  }
  normalize_gain(f, 0.0, fs);
  return f;
}

Vector filter_apply(std::span<const double> x, const IirCascade& f) {
  Vector y(x.begin(), x.end());
  for (const auto& s : f.sections) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

MultichannelSignal filter_apply(const MultichannelSignal& x, const IirCascade& f) {
  MultichannelSignal y = x;
  for (std::size_t c = 0; c < x.channels(); ++c) y.samples.set_column(c, filter_apply(x.samples.column(c), f));
  return y;
}

MultichannelSignal rereference(const MultichannelSignal& x, std::size_t ref_index, bool drop_ref) {
  if (ref_index >= x.channels()) throw Error(ErrorCode::BadChannelIndex, "reference channel out of range");
  const std::size_t out_c = drop_ref ? x.channels() - 1 : x.channels();
  MultichannelSignal y;
  y.fs = x.fs;
  y.samples = Matrix(x.length(), out_c);
  for (std::size_t c = 0, oc = 0; c < x.channels(); ++c) {
    if (drop_ref && c == ref_index) continue;
    if (!x.channel_names.empty()) y.channel_names.push_back(x.channel_names[c]);
    for (std::size_t t = 0; t < x.length(); ++t) y.samples(t, oc) = x.samples(t, c) - x.samples(t, ref_index);
    ++oc;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

struct Ratio {
  std::size_t up = 1;
  std::size_t down = 1;
};

Ratio rational_ratio(double fs, double to_fs) {
  if (!(fs > 0.0) || !(to_fs > 0.0)) throw Error(ErrorCode::IrrationalRatio, "sample rates must be positive");
  const double r = to_fs / fs;
  for (std::size_t q = 1; q <= 1000; ++q) {
    const double pq = r * static_cast<double>(q);
    const double p = std::round(pq);
    if (p >= 1.0 && std::abs(p - pq) <= 1e-9 * std::max(1.0, pq)) {
      const auto up = static_cast<std::size_t>(p);
      const std::size_t g = std::gcd(up, q);
      return {up / g, q / g};
    }
  }
  throw Error(ErrorCode::IrrationalRatio, "resampling ratio has no rational form with denominator <= 1000");
}

// Kaiser-windowed sinc at the upsampled rate.
Vector anti_alias_fir(double fs, double to_fs, const Ratio& ratio) {
  const double fs_up = fs * static_cast<double>(ratio.up);
  const double low = std::min(fs, to_fs);
  const double cutoff = 0.45 * low;
  const double transition = 0.1 * low;  // passband edge 0.40, stop edge 0.50
  const double atten_db = 60.0;
  const double beta = 0.1102 * (atten_db - 8.7);
  const double dw = 2.0 * std::numbers::pi * transition / fs_up;
  auto taps = static_cast<std::size_t>(std::ceil((atten_db - 8.0) / (2.285 * dw))) + 1;
  if (taps % 2 == 0) ++taps;
  const double mid = static_cast<double>(taps - 1) / 2.0;
  const double fc = cutoff / fs_up;
  const double i0_beta = std::cyl_bessel_i(0.0, beta);

  Vector h(taps);
  for (std::size_t k = 0; k < taps; ++k) {
    const double m = static_cast<double>(k) - mid;
    const double sinc = m == 0.0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * m) / (std::numbers::pi * m);
    const double ratio_k = m / mid;
    const double win = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - ratio_k * ratio_k))) / i0_beta;
    h[k] = sinc * win;
  }
  // Every polyphase branch gets unit DC gain so constants pass through exactly.
  for (std::size_t r = 0; r < ratio.up; ++r) {
    double sum = 0.0;
    for (std::size_t k = r; k < taps; k += ratio.up) sum += h[k];
    for (std::size_t k = r; k < taps; k += ratio.up) h[k] /= sum;
  }
  return h;
}

Vector apply_polyphase(std::span<const double> x, const Vector& h, const Ratio& ratio) {
  const std::size_t t_in = x.size();
  const std::size_t p = ratio.up;
  const std::size_t q = ratio.down;
  const std::size_t t_out = (t_in * p + q - 1) / q;
  const std::size_t n_taps = h.size();
  const std::size_t delay = (n_taps - 1) / 2;
  Vector y(t_out, 0.0);
  for (std::size_t m = 0; m < t_out; ++m) {
    const std::size_t j0 = m * q + delay;
    double acc = 0.0;
    // k ≡ j0 (mod p), 0 ≤ (j0 - k)/p < t_in
    for (std::size_t k = j0 % p; k < n_taps && k <= j0; k += p) {
      const std::size_t n = (j0 - k) / p;
      if (n >= t_in) continue;
      acc += h[k] * x[n];
    }
    y[m] = acc;
  }
  return y;
}

}  // namespace

Vector resample(std::span<const double> x, double fs, double to_fs) {
  const Ratio ratio = rational_ratio(fs, to_fs);
  if (ratio.up == 1 && ratio.down == 1) return Vector(x.begin(), x.end());
  return apply_polyphase(x, anti_alias_fir(fs, to_fs, ratio), ratio);
}

MultichannelSignal resample(const MultichannelSignal& x, double to_fs) {
  const Ratio ratio = rational_ratio(x.fs, to_fs);
  MultichannelSignal y;
  y.fs = to_fs;
  y.channel_names = x.channel_names;
  if (ratio.up == 1 && ratio.down == 1) {
    y.samples = x.samples;
    return y;
  }
  const Vector h = anti_alias_fir(x.fs, to_fs, ratio);
  const std::size_t t_out = (x.length() * ratio.up + ratio.down - 1) / ratio.down;
  y.samples = Matrix(t_out, x.channels());
  for (std::size_t c = 0; c < x.channels(); ++c)
    y.samples.set_column(c, apply_polyphase(x.samples.column(c), h, ratio));
  return y;
}

Vector zscore(std::span<const double> x) {
  const std::size_t n = x.size();
  Vector y(n, 0.0);
  if (n < 2) return y;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 1e-12 * std::abs(mean)) || sd == 0.0) return y;
  for (std::size_t i = 0; i < n; ++i) y[i] = (x[i] - mean) / sd;
  return y;
}

MultichannelSignal zscore(const MultichannelSignal& x) {
  MultichannelSignal y = x;
  for (std::size_t c = 0; c < x.channels(); ++c) y.samples.set_column(c, zscore(x.samples.column(c)));
  return y;
}

MultichannelSignal preprocess_chain(const MultichannelSignal& x, const PreprocessOptions& opt) {
  validate(x);
  MultichannelSignal y = x;
  if (opt.reference_channel) y = rereference(y, *opt.reference_channel, opt.drop_reference);
  y = filter_apply(y, design_bandpass(opt.band_low_hz, opt.band_high_hz, opt.band_order, y.fs));
  y = filter_apply(y, design_notch(opt.notch_low_hz, opt.notch_high_hz, y.fs));
  y = resample(y, opt.target_fs);
  return zscore(y);
}

}  // namespace aad
