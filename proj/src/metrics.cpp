#include "aad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace aad {

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double pcc(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "pcc inputs differ in length");
  if (a.size() < 2) throw Error(ErrorCode::LengthMismatch, "pcc needs at least two samples");
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

WindowDecision decide_window(std::span<const double> rhos, std::size_t attended_index) {
  WindowDecision d;
  if (rhos.empty()) return d;
  const auto best = std::max_element(rhos.begin(), rhos.end());
  d.predicted = static_cast<std::size_t>(best - rhos.begin());
  d.tie = std::count(rhos.begin(), rhos.end(), *best) > 1;
  d.correct = attended_index < rhos.size();
  for (std::size_t i = 0; i < rhos.size() && d.correct; ++i)
    if (i != attended_index && !(rhos[attended_index] > rhos[i])) d.correct = false;
  return d;
}

ClassificationScores classification_metrics(std::span<const int> predictions, std::span<const int> labels,
                                            int n_classes) {
  if (predictions.size() != labels.size())
    throw Error(ErrorCode::LengthMismatch, "prediction and label counts differ");
  ClassificationScores s;
  if (labels.empty()) return s;
  std::vector<double> tp(n_classes, 0.0), fp(n_classes, 0.0), fn(n_classes, 0.0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    const int p = predictions[i];
    if (y < 0 || y >= n_classes) throw Error(ErrorCode::BadConfig, "label outside class range");
    const bool p_valid = p >= 0 && p < n_classes;
    if (p == y) {
      ++correct;
      tp[y] += 1.0;
    } else {
      fn[y] += 1.0;
      if (p_valid) fp[p] += 1.0;
    }
  }
  s.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  double f1_sum = 0.0;
  for (int k = 0; k < n_classes; ++k) {
    const double denom = 2.0 * tp[k] + fp[k] + fn[k];
    f1_sum += denom > 0.0 ? 2.0 * tp[k] / denom : 0.0;
  }
  s.macro_f1 = f1_sum / n_classes;
  return s;
}

TimePccCurve time_pcc_curve(std::span<const double> reconstructed, std::span<const Vector> candidates, double fs,
                            double seg_s) {
  if (!(seg_s > 0.0) || !(fs > 0.0)) throw Error(ErrorCode::BadConfig, "segment length must be positive");
  for (const auto& c : candidates)
    if (c.size() != reconstructed.size())
      throw Error(ErrorCode::LengthMismatch, "candidate length differs from reconstruction");
  TimePccCurve curve;
  curve.seg_s = seg_s;
  const auto seg_len = static_cast<std::size_t>(std::llround(seg_s * fs));
  if (seg_len < 2) throw Error(ErrorCode::BadConfig, "segment shorter than two samples");
  const std::size_t n_seg = reconstructed.size() / seg_len;
  for (const auto& c : candidates) {
    Vector row(n_seg);
    for (std::size_t s = 0; s < n_seg; ++s)
      row[s] = pcc(reconstructed.subspan(s * seg_len, seg_len), std::span<const double>(c).subspan(s * seg_len, seg_len));
    curve.pcc.push_back(std::move(row));
  }
  return curve;
}

double detect_crossover(std::span<const double> first, std::span<const double> second, double seg_s,
                        std::size_t smooth) {
  if (first.size() != second.size()) throw Error(ErrorCode::LengthMismatch, "curves differ in length");
  const std::size_t n = first.size();
  if (n < 2) return 0.0;
  Vector diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = first[i] - second[i];
  Vector sm(n);
  const std::size_t half = smooth / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    sm[i] = mean(std::span<const double>(diff).subspan(lo, hi - lo));
  }
  // score(k) = Σ_{i<k} sm_i − Σ_{i≥k} sm_i, maximized over interior k.
  const double total = std::accumulate(sm.begin(), sm.end(), 0.0);
  double prefix = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_k = 1;
  for (std::size_t k = 1; k < n; ++k) {
    prefix += sm[k - 1];
    const double score = prefix - (total - prefix);
    if (score > best) {
      best = score;
      best_k = k;
    }
  }
  return static_cast<double>(best_k) * seg_s;
}

namespace {

double binomial_cdf(std::size_t k, std::size_t n, double p) {
  double acc = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    const double log_term = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) +
                            i * std::log(p) + (n - i) * std::log1p(-p);
    acc += std::exp(log_term);
  }
  return acc;
}

}  // namespace

std::pair<double, double> binomial_interval(std::size_t n, double p, double confidence) {
  if (n == 0) return {0.0, 1.0};
  const double tail = (1.0 - confidence) / 2.0;
  std::size_t lo = 0;
  while (lo < n && binomial_cdf(lo, n, p) < tail) ++lo;
  std::size_t hi = 0;
  while (hi < n && binomial_cdf(hi, n, p) < 1.0 - tail) ++hi;
  return {static_cast<double>(lo) / n, static_cast<double>(hi) / n};
}

}  // namespace aad
