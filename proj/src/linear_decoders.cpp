#include "aad/linear_decoders.hpp"

#include <algorithm>
#include <cmath>

#include "aad/metrics.hpp"

namespace aad {

WfModel wf_fit(const CovStats& stats, double lambda) {
  if (lambda < 0.0) throw Error(ErrorCode::BadConfig, "lambda must be nonnegative");
  return {solve_regularized(stats.rxx, stats.rxy, lambda), lambda, stats.lags, stats.channels};
}

Vector wf_predict(const LaggedDesign& x, const WfModel& model) {
  if (x.width() != model.w.size()) throw Error(ErrorCode::DimensionMismatch, "design width differs from model");
  return x.matrix * std::span<const double>(model.w);
}

CcaBasis cca_basis(const CovStats& stats) {
  if (!stats.ryy || !stats.rxy_mat) throw Error(ErrorCode::DimensionMismatch, "CCA needs lagged-target statistics");
  return {sym_eig(stats.rxx), sym_eig(*stats.ryy)};
}

namespace {

EigPairs shifted(const EigPairs& e, double reg) {
  EigPairs s = e;
  for (double& v : s.values) v += reg;
  return s;
}

}  // namespace

CcaModel cca_fit(const CovStats& stats, const CcaBasis& basis, double reg, std::size_t n_components) {
  if (!stats.ryy || !stats.rxy_mat) throw Error(ErrorCode::DimensionMismatch, "CCA needs lagged-target statistics");
  if (reg < 0.0) throw Error(ErrorCode::BadConfig, "regularization must be nonnegative");
  const std::size_t dx = stats.rxx.n();
  const std::size_t dy = stats.ryy->n();
  if (n_components < 1 || n_components > std::min(dx, dy))
    throw Error(ErrorCode::BadConfig, "component count must be within [1, min(dx, dy)]");

  const SymMatrix wx = spd_function(shifted(basis.xx, reg), SpdFunction::InvSqrt);
  const SymMatrix wy = spd_function(shifted(basis.yy, reg), SpdFunction::InvSqrt);
  const Matrix whitened = wx.matrix() * *stats.rxy_mat * wy.matrix();
  const SvdResult dec = svd(whitened);

  CcaModel m;
  m.reg = reg;
  m.lags = stats.lags;
  m.channels = stats.channels;
  m.target_lags = stats.target_lags;
  m.wx = Matrix(dx, n_components);
  m.wy = Matrix(dy, n_components);
  const Matrix ux = wx.matrix() * dec.u;
  const Matrix vy = wy.matrix() * dec.v;
  for (std::size_t i = 0; i < n_components; ++i) {
    for (std::size_t r = 0; r < dx; ++r) m.wx(r, i) = ux(r, i);
    for (std::size_t r = 0; r < dy; ++r) m.wy(r, i) = vy(r, i);
    m.correlations.push_back(std::clamp(dec.s[i], 0.0, 1.0));
  }
  return m;
}

CcaModel cca_fit(const CovStats& stats, double reg, std::size_t n_components) {
  return cca_fit(stats, cca_basis(stats), reg, n_components);
}

Matrix cca_project_eeg(const LaggedDesign& x, const CcaModel& model) {
  if (x.width() != model.wx.rows()) throw Error(ErrorCode::DimensionMismatch, "EEG design width differs from model");
  return x.matrix * model.wx;
}

Matrix cca_project_target(const LaggedDesign& y, const CcaModel& model) {
  if (y.width() != model.wy.rows()) throw Error(ErrorCode::DimensionMismatch, "target design width differs from model");
  return y.matrix * model.wy;
}

double cca_score(const LaggedDesign& x, const LaggedDesign& y, const CcaModel& model) {
  if (x.length() != y.length()) throw Error(ErrorCode::DimensionMismatch, "EEG and target lengths differ");
  const Matrix px = cca_project_eeg(x, model);
  const Matrix py = cca_project_target(y, model);
  double score = 0.0;
  for (std::size_t i = 0; i < model.n_components(); ++i) score += pcc(px.column(i), py.column(i));
  return score;
}

ChannelWeightStats channel_weight_stats(std::span<const double> w, std::size_t lags, std::size_t channels) {
  if (w.size() != lags * channels) throw Error(ErrorCode::DimensionMismatch, "weight length differs from L·C");
  ChannelWeightStats s{Vector(channels, 0.0), Vector(channels, 0.0)};
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t l = 0; l < lags; ++l) {
      const double v = w[c * lags + l];
      s.max_abs[c] = std::max(s.max_abs[c], std::abs(v));
      s.mean_sq[c] += v * v;
    }
    s.mean_sq[c] /= static_cast<double>(lags);
  }
  return s;
}

ChannelWeightStats channel_weight_stats(const WfModel& model) {
  return channel_weight_stats(model.w, model.lags, model.channels);
}

ChannelWeightStats channel_weight_stats(const CcaModel& model) {
  return channel_weight_stats(model.wx.column(0), model.lags, model.channels);
}

}  // namespace aad
