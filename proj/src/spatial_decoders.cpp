#include "aad/spatial_decoders.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aad {

SymMatrix window_covariance(const Matrix& segment) {
  const std::size_t t_len = segment.rows();
  const std::size_t n_ch = segment.cols();
  if (t_len < 2) throw Error(ErrorCode::DimensionMismatch, "covariance window needs at least two samples");
  Matrix centered = segment;
  for (std::size_t c = 0; c < n_ch; ++c) {
    double m = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) m += segment(t, c);
    m /= static_cast<double>(t_len);
    for (std::size_t t = 0; t < t_len; ++t) centered(t, c) -= m;
  }
  Matrix cov = transpose_times(centered, centered);
  return SymMatrix::symmetrize((1.0 / static_cast<double>(t_len - 1)) * cov);
}

std::vector<Matrix> csp_filters_from_covariances(std::span<const SymMatrix> class_covs, const SymMatrix& total,
                                                 std::size_t f_per) {
  const std::size_t n_ch = total.n();
  if (f_per < 1 || f_per > n_ch) throw Error(ErrorCode::BadConfig, "filters per class must be within [1, C]");
  const SpdMatrix total_spd(total);
  std::vector<Matrix> out;
  for (const auto& rk : class_covs) {
    if (rk.n() != n_ch) throw Error(ErrorCode::DimensionMismatch, "class covariance size differs");
    if (rk.matrix().frobenius_norm() == 0.0) throw Error(ErrorCode::DegenerateClass, "class covariance is zero");
    const EigPairs e = gen_sym_eig(rk, total_spd);
    Matrix w(n_ch, f_per);
    for (std::size_t f = 0; f < f_per; ++f)
      for (std::size_t c = 0; c < n_ch; ++c) w(c, f) = e.vectors(c, f);
    out.push_back(std::move(w));
  }
  return out;
}

namespace {

std::vector<Band> clipped_bands(const std::vector<Band>& bands, double fs) {
  std::vector<Band> out;
  for (auto [lo, hi] : bands) out.emplace_back(lo, std::min(hi, 0.49 * fs));
  return out;
}

Matrix band_filtered(const Matrix& segment, const CspModel& model, std::size_t band) {
  if (model.band_filters.empty()) return segment;
  Matrix out(segment.rows(), segment.cols());
  for (std::size_t c = 0; c < segment.cols(); ++c) out.set_column(c, filter_apply(segment.column(c), model.band_filters[band]));
  return out;
}

}  // namespace

CspModel csp_fit(std::span<const Matrix> segments, std::span<const int> labels, std::size_t n_classes, double fs,
                 const CspOptions& opt) {
  if (segments.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "segment and label counts differ");
  if (n_classes < 2) throw Error(ErrorCode::BadConfig, "CSP needs at least two classes");
  if (segments.empty()) throw Error(ErrorCode::DegenerateClass, "no training segments");

  CspModel model;
  model.n_classes = n_classes;
  model.f_per = opt.f_per;
  model.channels = segments.front().cols();
  model.fs = fs;
  model.bands = clipped_bands(opt.bands, fs);
  for (auto [lo, hi] : model.bands) model.band_filters.push_back(design_bandpass(lo, hi, opt.band_order, fs));

  const std::size_t n_bands = std::max<std::size_t>(1, model.bands.size());
  for (std::size_t j = 0; j < n_bands; ++j) {
    std::vector<Matrix> class_sum(n_classes, Matrix(model.channels, model.channels));
    std::vector<std::size_t> class_count(n_classes, 0);
    Matrix total(model.channels, model.channels);
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (segments[i].cols() != model.channels) throw Error(ErrorCode::DimensionMismatch, "segment channel counts differ");
      const int k = labels[i];
      if (k < 0 || static_cast<std::size_t>(k) >= n_classes) throw Error(ErrorCode::BadConfig, "label outside class range");
      const SymMatrix cov = window_covariance(band_filtered(segments[i], model, j));
      class_sum[k] = class_sum[k] + cov.matrix();
      total = total + cov.matrix();
      ++class_count[k];
    }
    std::vector<SymMatrix> class_covs;
    for (std::size_t k = 0; k < n_classes; ++k) {
      if (class_count[k] == 0) throw Error(ErrorCode::DegenerateClass, "a class has no training segments");
      class_covs.push_back(SymMatrix::symmetrize((1.0 / static_cast<double>(class_count[k])) * class_sum[k]));
    }
    const SymMatrix total_cov = SymMatrix::symmetrize((1.0 / static_cast<double>(segments.size())) * total);
    for (auto& w : csp_filters_from_covariances(class_covs, total_cov, opt.f_per)) model.filters.push_back(std::move(w));
  }
  return model;
}

Vector csp_features(const Matrix& segment, const CspModel& model) {
  if (segment.cols() != model.channels) throw Error(ErrorCode::DimensionMismatch, "segment channel count differs from model");
  if (segment.rows() < 2) throw Error(ErrorCode::DimensionMismatch, "segment needs at least two samples");
  Vector features;
  features.reserve(model.feature_length());
  const std::size_t n_bands = std::max<std::size_t>(1, model.bands.size());
  for (std::size_t j = 0; j < n_bands; ++j) {
    const Matrix x = band_filtered(segment, model, j);
    for (std::size_t k = 0; k < model.n_classes; ++k) {
      const Matrix proj = x * model.filter(j, k);
      for (std::size_t f = 0; f < model.f_per; ++f) {
        const Vector p = proj.column(f);
        double m = 0.0;
        for (double v : p) m += v;
        m /= static_cast<double>(p.size());
        double ss = 0.0;
        for (double v : p) ss += (v - m) * (v - m);
        const double var = ss / static_cast<double>(p.size() - 1);
        features.push_back(std::log(std::max(var, std::numeric_limits<double>::min())));
      }
    }
  }
  return features;
}

// ---------------------------------------------------------------------------
// Riemannian

SymMatrix shrink(const SymMatrix& cov, double alpha) {
  if (alpha < 0.0 || alpha >= 1.0) throw Error(ErrorCode::BadConfig, "shrinkage must lie in [0, 1)");
  const double mu = cov.trace() / static_cast<double>(cov.n());
  Matrix m = (1.0 - alpha) * cov.matrix();
  for (std::size_t i = 0; i < cov.n(); ++i) m(i, i) += alpha * mu;
  return SymMatrix::symmetrize(m);
}

SymMatrix riemannian_mean(std::span<const SymMatrix> covs) {
  if (covs.empty()) throw Error(ErrorCode::NotSpd, "mean of an empty covariance set");
  const std::size_t n = covs.front().n();
  Matrix acc(n, n);
  for (const auto& c : covs) {
    if (c.n() != n) throw Error(ErrorCode::DimensionMismatch, "covariances differ in size");
    acc = acc + spd_function(c, SpdFunction::Log).matrix();
  }
  return spd_function(SymMatrix::symmetrize((1.0 / static_cast<double>(covs.size())) * acc), SpdFunction::ExpOfSym);
}

RgcModel rgc_model_from_mean(const SymMatrix& mean, double shrinkage) {
  return {mean, spd_function(mean, SpdFunction::InvSqrt), shrinkage, mean.n()};
}

RgcModel rgc_fit(std::span<const Matrix> segments, double shrinkage) {
  std::vector<SymMatrix> covs;
  covs.reserve(segments.size());
  for (const auto& s : segments) covs.push_back(shrink(window_covariance(s), shrinkage));
  return rgc_model_from_mean(riemannian_mean(covs), shrinkage);
}

SymMatrix tangent_matrix(const SymMatrix& cov, const RgcModel& model) {
  if (cov.n() != model.channels) throw Error(ErrorCode::DimensionMismatch, "covariance size differs from model");
  const Matrix& w = model.mean_inv_sqrt.matrix();
  return spd_function(SymMatrix::symmetrize(w * cov.matrix() * w), SpdFunction::Log);
}

Vector upper_triangle(const SymMatrix& t) {
  Vector v;
  v.reserve(t.n() * (t.n() + 1) / 2);
  for (std::size_t i = 0; i < t.n(); ++i)
    for (std::size_t j = i; j < t.n(); ++j) v.push_back(i == j ? t(i, j) : std::sqrt(2.0) * t(i, j));
  return v;
}

Vector tangent_features(const Matrix& segment, const RgcModel& model) {
  if (segment.cols() != model.channels) throw Error(ErrorCode::DimensionMismatch, "segment channel count differs from model");
  return upper_triangle(tangent_matrix(shrink(window_covariance(segment), model.shrinkage), model));
}

// ---------------------------------------------------------------------------
// LDA

LdaModel lda_fit(const Matrix& features, std::span<const int> labels, int n_classes, double gamma) {
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  if (labels.size() != n) throw Error(ErrorCode::LengthMismatch, "feature and label counts differ");
  if (n == 0 || n_classes < 1) throw Error(ErrorCode::BadConfig, "LDA needs samples and classes");
  if (gamma < 0.0) throw Error(ErrorCode::BadConfig, "LDA shrinkage must be nonnegative");

  const auto k_count = static_cast<std::size_t>(n_classes);
  LdaModel m;
  m.gamma = gamma;
  m.class_means = Matrix(k_count, d);
  m.priors.assign(k_count, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= n_classes) throw Error(ErrorCode::BadConfig, "label outside class range");
    m.priors[y] += 1.0;
    auto mu = m.class_means.row(y);
    auto x = features.row(i);
    for (std::size_t j = 0; j < d; ++j) mu[j] += x[j];
  }
  std::size_t present = 0;
  for (std::size_t k = 0; k < k_count; ++k) {
    if (m.priors[k] == 0.0) continue;
    ++present;
    for (double& v : m.class_means.row(k)) v /= m.priors[k];
  }

  Matrix scatter(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = features.row(i);
    auto mu = m.class_means.row(labels[i]);
    for (std::size_t a = 0; a < d; ++a) {
      const double da = x[a] - mu[a];
      if (da == 0.0) continue;
      for (std::size_t b = a; b < d; ++b) scatter(a, b) += da * (x[b] - mu[b]);
    }
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < a; ++b) scatter(a, b) = scatter(b, a);
  const double dof = static_cast<double>(n > present ? n - present : 1);
  const SymMatrix pooled = SymMatrix::symmetrize((1.0 / dof) * scatter);
  const double ridge = gamma * pooled.trace() / static_cast<double>(d);

  m.weights = Matrix(d, k_count);
  m.bias.assign(k_count, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < k_count; ++k) {
    if (m.priors[k] == 0.0) continue;
    Vector wk;
    try {
      wk = solve_regularized(pooled, m.class_means.row(k), ridge);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::SingularSystem) throw Error(ErrorCode::SingularScatter, "pooled scatter is singular");
      throw;
    }
    m.weights.set_column(k, wk);
    m.bias[k] = -0.5 * dot(m.class_means.row(k), wk) + std::log(m.priors[k] / static_cast<double>(n));
  }
  for (double& p : m.priors) p /= static_cast<double>(n);
  return m;
}

Matrix lda_scores(const Matrix& features, const LdaModel& model) {
  if (features.rows() == 0) return Matrix(0, model.n_classes());
  if (features.cols() != model.dims()) throw Error(ErrorCode::DimensionMismatch, "feature width differs from model");
  Matrix s = features * model.weights;
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t k = 0; k < s.cols(); ++k) s(i, k) += model.bias[k];
  return s;
}

std::vector<int> lda_predict(const Matrix& features, const LdaModel& model) {
  const Matrix s = lda_scores(features, model);
  std::vector<int> out(s.rows(), 0);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < s.cols(); ++k)
      if (s(i, k) > s(i, best)) best = k;
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace aad
