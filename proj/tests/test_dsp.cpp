#include "doctest.h"

#include <cmath>
#include <complex>
#include <numbers>

#include "aad/envelope.hpp"
#include "aad/preprocess.hpp"
#include "test_util.hpp"

using namespace aad;

namespace {

MultichannelSignal make_signal(const Matrix& m, double fs) {
  MultichannelSignal s;
  s.samples = m;
  s.fs = fs;
  for (std::size_t c = 0; c < m.cols(); ++c) s.channel_names.push_back("E" + std::to_string(c + 1));
  return s;
}

Vector sine(double f, double fs, std::size_t n, double amp = 1.0) {
  Vector v(n);
  for (std::size_t t = 0; t < n; ++t) v[t] = amp * std::sin(2.0 * std::numbers::pi * f * t / fs);
  return v;
}

// Direct form I, one section after another.
Vector direct_form(const Vector& x, const IirCascade& f) {
  Vector y = x;
  for (const Biquad& s : f.sections) {
    Vector out(y.size());
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (std::size_t t = 0; t < y.size(); ++t) {
      const double v = s.b0 * y[t] + s.b1 * x1 + s.b2 * x2 - s.a1 * y1 - s.a2 * y2;
      x2 = x1;
      x1 = y[t];
      y2 = y1;
      y1 = v;
      out[t] = v;
    }
    y = out;
  }
  return y;
}

double dft_amplitude(const Vector& x, double f, double fs) {
  std::complex<double> acc = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t)
    acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * f * t / fs);
  return 2.0 * std::abs(acc) / x.size();
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("bandpass design") {
  const IirCascade bp = design_bandpass(0.5, 62.0, 8, 125.0);
  CHECK(std::abs(bp.gain_db(10.0, 125.0)) < 1.0);
  CHECK(bp.gain_db(0.05, 125.0) < -40.0);
  CHECK(std::abs(bp.gain_db(std::sqrt(0.5 * 62.0), 125.0)) < 1.0);
  CHECK(bp.max_pole_magnitude() < 1.0);

  const IirCascade narrow = design_bandpass(1.0, 20.0, 2, 125.0);
  CHECK(narrow.max_pole_magnitude() < 1.0);
  CHECK(std::abs(narrow.gain_db(std::sqrt(20.0), 125.0)) < 1.0);

  CHECK(code_of([] { design_bandpass(10.0, 5.0, 8, 125.0); }) == ErrorCode::InvalidBand);
  CHECK(code_of([] { design_bandpass(1.0, 70.0, 8, 125.0); }) == ErrorCode::InvalidBand);
  CHECK(code_of([] { design_bandpass(1.0, 20.0, 3, 125.0); }) == ErrorCode::InvalidBand);
}

TEST_CASE("notch design") {
  const IirCascade n = design_notch(48.0, 52.0, 125.0);
  CHECK(n.gain_db(50.0, 125.0) <= -20.0);
  CHECK(std::abs(n.gain_db(20.0, 125.0)) < 1.0);
  CHECK(std::abs(n.gain_db(24.0, 125.0)) < 1.0);
  CHECK(n.max_pole_magnitude() < 1.0);
  CHECK(code_of([] { design_notch(52.0, 48.0, 125.0); }) == ErrorCode::InvalidBand);
}

TEST_CASE("filter_apply") {
  const IirCascade bp = design_bandpass(0.5, 62.0, 8, 125.0);
  const MultichannelSignal zero = make_signal(Matrix(100, 2), 125.0);
  const MultichannelSignal filtered_zero = filter_apply(zero, bp);
  for (double v : filtered_zero.samples.data()) CHECK(v == 0.0);

  IirCascade identity;
  identity.sections.push_back(Biquad{});
  Vector impulse(16, 0.0);
  impulse[0] = 1.0;
  CHECK(filter_apply(impulse, identity) == impulse);

  const Vector x = sine(10.0, 125.0, 3750);
  const Vector y = filter_apply(x, bp);
  const Vector ref = direct_form(x, bp);
  double diff = 0.0, peak = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) diff = std::max(diff, std::abs(y[t] - ref[t]));
  for (std::size_t t = 2500; t < y.size(); ++t) peak = std::max(peak, std::abs(y[t]));
  CHECK(diff < 1e-9);
  CHECK(std::abs(20.0 * std::log10(peak)) < 1.0);
  CHECK(std::abs(peak - std::abs(bp.response(10.0, 125.0))) < 0.01);

  std::mt19937_64 rng(11);
  const Vector a = testutil::random_vector(rng, 500), b = testutil::random_vector(rng, 500);
  Vector mix(500);
  for (std::size_t t = 0; t < 500; ++t) mix[t] = 2.0 * a[t] - 0.5 * b[t];
  const Vector fa = filter_apply(a, bp), fb = filter_apply(b, bp), fm = filter_apply(mix, bp);
  double worst = 0.0, scale = 0.0;
  for (std::size_t t = 0; t < 500; ++t) {
    worst = std::max(worst, std::abs(fm[t] - (2.0 * fa[t] - 0.5 * fb[t])));
    scale = std::max(scale, std::abs(fm[t]));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("rereference") {
  std::mt19937_64 rng(12);
  Matrix m = testutil::random_matrix(rng, 50, 3);
  const MultichannelSignal x = make_signal(m, 125.0);

  const MultichannelSignal kept = rereference(x, 0, false);
  CHECK(kept.channels() == 3);
  for (std::size_t t = 0; t < 50; ++t) {
    CHECK(kept.samples(t, 0) == 0.0);
    for (std::size_t c = 1; c < 3; ++c) CHECK(kept.samples(t, c) == doctest::Approx(m(t, c) - m(t, 0)));
  }
  const MultichannelSignal dropped = rereference(x, 1, true);
  CHECK(dropped.channels() == 2);
  CHECK(dropped.channel_names == std::vector<std::string>{"E1", "E3"});
  for (std::size_t t = 0; t < 50; ++t) CHECK(dropped.samples(t, 1) == doctest::Approx(m(t, 2) - m(t, 1)));

  const MultichannelSignal twice = rereference(kept, 0, false);
  CHECK(twice.samples == kept.samples);

  Matrix same(10, 2);
  for (std::size_t t = 0; t < 10; ++t) same(t, 0) = same(t, 1) = std::sin(0.3 * t);
  const MultichannelSignal same_ref = rereference(make_signal(same, 125.0), 1, false);
  for (double v : same_ref.samples.data()) CHECK(v == 0.0);

  CHECK(code_of([&] { rereference(x, 3, false); }) == ErrorCode::BadChannelIndex);
}

TEST_CASE("resample") {
  const MultichannelSignal constant = make_signal(Matrix(3750, 1, 2.5), 125.0);
  const MultichannelSignal r = resample(constant, 40.0);
  CHECK(r.length() == 1200);
  CHECK(r.fs == 40.0);
  for (std::size_t t = 100; t < 1100; ++t) CHECK(std::abs(r.samples(t, 0) - 2.5) < 1e-6);

  const Vector s = resample(sine(5.0, 125.0, 3750), 125.0, 40.0);
  CHECK(s.size() == 1200);
  double best_f = 0.0, best_a = 0.0;
  for (int k = 1; k < 600; ++k) {
    const double f = k / 30.0;
    const double a = dft_amplitude(s, f, 40.0);
    if (a > best_a) best_a = a, best_f = f;
  }
  CHECK(best_f == doctest::Approx(5.0));
  CHECK(std::abs(best_a - 1.0) < 0.02);

  // Up and back down keeps the tone where it was.
  const Vector up = resample(sine(3.0, 40.0, 1200), 40.0, 125.0);
  const Vector back = resample(up, 125.0, 40.0);
  CHECK(back.size() == 1200);
  CHECK(dft_amplitude(back, 3.0, 40.0) > 0.95);

  CHECK(resample(Vector(7, 1.0), 125.0, 40.0).size() == 3);  // ceil(7·40/125)
  CHECK(code_of([] { resample(Vector(10, 1.0), 125.0, 40.0 * std::numbers::pi); }) == ErrorCode::IrrationalRatio);
}

TEST_CASE("zscore") {
  std::mt19937_64 rng(13);
  Matrix m = testutil::random_matrix(rng, 200, 3);
  for (std::size_t t = 0; t < 200; ++t) m(t, 0) = 3.0 * m(t, 0) + 7.0, m(t, 2) = 4.0;
  const MultichannelSignal z = zscore(make_signal(m, 40.0));
  for (std::size_t c = 0; c < 2; ++c) {
    Vector col = z.samples.column(c);
    double mu = 0.0, ss = 0.0;
    for (double v : col) mu += v;
    mu /= col.size();
    for (double v : col) ss += (v - mu) * (v - mu);
    CHECK(std::abs(mu) < 1e-9);
    CHECK(std::sqrt(ss / (col.size() - 1)) == doctest::Approx(1.0));
  }
  for (std::size_t t = 0; t < 200; ++t) CHECK(z.samples(t, 2) == 0.0);
  CHECK(testutil::max_abs_diff(zscore(z).samples, z.samples) < 1e-9);
}

TEST_CASE("preprocess chain is deterministic and lands at the target rate") {
  std::mt19937_64 rng(14);
  const MultichannelSignal x = make_signal(testutil::random_matrix(rng, 3750, 4), 125.0);
  PreprocessOptions opt;
  opt.reference_channel = 0;
  const MultichannelSignal a = preprocess_chain(x, opt);
  const MultichannelSignal b = preprocess_chain(x, opt);
  CHECK(a.samples == b.samples);
  CHECK(a.length() == 1200);
  CHECK(a.channels() == 3);
  CHECK(a.fs == 40.0);
}

TEST_CASE("gammatone bank layout") {
  const GammatoneBank bank = gammatone_bank(16000.0, 50.0, 5000.0, 17);
  REQUIRE(bank.channels.size() == 17);
  CHECK(bank.channels.front().center_hz >= 50.0);
  CHECK(bank.channels.back().center_hz <= 5000.0);
  for (std::size_t k = 1; k < 17; ++k) CHECK(bank.channels[k].center_hz > bank.channels[k - 1].center_hz);

  const GammatoneBank one = gammatone_bank(16000.0, 100.0, 4000.0, 1);
  REQUIRE(one.channels.size() == 1);
  CHECK(one.channels[0].center_hz == doctest::Approx(erb_rate_inverse(0.5 * (erb_rate(100.0) + erb_rate(4000.0)))));

  CHECK(erb_rate_inverse(erb_rate(1234.0)) == doctest::Approx(1234.0));
  CHECK(code_of([] { gammatone_bank(16000.0, 5000.0, 50.0, 17); }) == ErrorCode::InvalidBand);
}

TEST_CASE("gammatone magnitude peaks at the nominal center") {
  const GammatoneBank bank = gammatone_bank(16000.0, 50.0, 5000.0, 17);
  for (std::size_t k = 0; k < bank.channels.size(); ++k) {
    const double fc = bank.channels[k].center_hz;
    double best_f = 0.0, best_m = -1.0;
    for (int i = 0; i <= 2000; ++i) {
      const double f = fc * (0.5 + i / 2000.0);
      const double m = std::abs(bank.response(k, f));
      if (m > best_m) best_m = m, best_f = f;
    }
    CHECK(std::abs(best_f - fc) / fc < 0.05);
    CHECK(std::abs(bank.response(k, fc)) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("envelope extraction") {
  const GammatoneBank bank = gammatone_bank(16000.0, 50.0, 5000.0, 17);
  AudioTrack silent{Vector(16000, 0.0), 16000.0, 1};
  const Envelope z = compute_envelope(silent, bank, 40.0);
  CHECK(z.samples.size() == 40);
  CHECK(z.fs == 40.0);
  for (double v : z.samples) CHECK(v == 0.0);

  std::mt19937_64 rng(15);
  AudioTrack noise{testutil::random_vector(rng, 16000), 16000.0, 1};
  const Envelope base = compute_envelope(noise, bank, 40.0);
  for (double v : base.samples) CHECK(v >= 0.0);

  AudioTrack flipped = noise;
  for (double& v : flipped.samples) v = -v;
  CHECK(compute_envelope(flipped, bank, 40.0).samples == base.samples);

  std::uniform_real_distribution<double> log_alpha(std::log(0.1), std::log(10.0));
  for (int rep = 0; rep < 3; ++rep) {
    const double alpha = std::exp(log_alpha(rng));
    AudioTrack scaled = noise;
    for (double& v : scaled.samples) v *= alpha;
    const Envelope s = compute_envelope(scaled, bank, 40.0);
    const double g = std::pow(alpha, 0.6);
    for (std::size_t t = 0; t < s.samples.size(); ++t)
      CHECK(std::abs(s.samples[t] - g * base.samples[t]) <= 1e-6 * std::max(1e-12, g * base.samples[t]) + 1e-12);
  }
}

TEST_CASE("pure tone envelope is flat") {
  const GammatoneBank bank = gammatone_bank(16000.0, 50.0, 5000.0, 17);
  const double fc = bank.channels[8].center_hz;
  AudioTrack tone{sine(fc, 16000.0, 32000), 16000.0, 1};
  const Envelope e = compute_envelope(tone, bank, 40.0);
  REQUIRE(e.samples.size() == 80);
  double mu = 0.0, ss = 0.0;
  const std::size_t lo = 10, hi = 70;
  for (std::size_t t = lo; t < hi; ++t) mu += e.samples[t];
  mu /= hi - lo;
  for (std::size_t t = lo; t < hi; ++t) ss += std::pow(e.samples[t] - mu, 2);
  CHECK(std::sqrt(ss / (hi - lo)) / mu < 0.1);
}
