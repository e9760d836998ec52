#pragma once

#include <span>
#include <utility>
#include <vector>

#include "aad/numerics.hpp"
#include "aad/preprocess.hpp"

namespace aad {

using Band = std::pair<double, double>;

// Multiclass filter-bank CSP. filters[j * n_classes + k] is the C × F
// spatial filter of band j, class k (one-vs-all contrast).
struct CspModel {
  std::vector<Band> bands;
  std::vector<IirCascade> band_filters;  // empty → segments used as given
  std::vector<Matrix> filters;
  std::size_t n_classes = 0;
  std::size_t f_per = 0;
  std::size_t channels = 0;
  double fs = 0.0;

  const Matrix& filter(std::size_t band, std::size_t cls) const { return filters[band * n_classes + cls]; }
  std::size_t feature_length() const { return std::max<std::size_t>(1, bands.size()) * n_classes * f_per; }
};

struct CspOptions {
  std::vector<Band> bands = {{1.0, 4.0}, {4.0, 8.0}, {8.0, 14.0}, {14.0, 20.0}};
  std::size_t f_per = 4;
  int band_order = 4;
};

// Per-window channel covariance XᵀX/(T−1) after removing each channel's mean.
SymMatrix window_covariance(const Matrix& segment);

// Top-F generalized eigenvectors of (class_covs[k], total) for every class.
std::vector<Matrix> csp_filters_from_covariances(std::span<const SymMatrix> class_covs, const SymMatrix& total,
                                                 std::size_t f_per);

// Band edges at or above 0.49·fs are pulled down to 0.49·fs.
CspModel csp_fit(std::span<const Matrix> segments, std::span<const int> labels, std::size_t n_classes, double fs,
                 const CspOptions& opt = {});

// log var of each projected signal, ordered band → class → filter.
Vector csp_features(const Matrix& segment, const CspModel& model);

struct RgcModel {
  SymMatrix mean;
  SymMatrix mean_inv_sqrt;
  double shrinkage = 0.1;
  std::size_t channels = 0;
};

// (1 − α)·cov + α·(trace/C)·I.
SymMatrix shrink(const SymMatrix& cov, double alpha);

// Log-Euclidean mean exp(mean_i log C_i).
SymMatrix riemannian_mean(std::span<const SymMatrix> covs);

RgcModel rgc_fit(std::span<const Matrix> segments, double shrinkage = 0.1);
RgcModel rgc_model_from_mean(const SymMatrix& mean, double shrinkage);

// log(M^{-1/2} · cov · M^{-1/2}) for an already-shrunk covariance.
SymMatrix tangent_matrix(const SymMatrix& cov, const RgcModel& model);
// Upper triangle with off-diagonal entries scaled by √2.
Vector upper_triangle(const SymMatrix& t);
Vector tangent_features(const Matrix& segment, const RgcModel& model);

struct LdaModel {
  Matrix class_means;  // K × D
  Matrix weights;      // D × K, Σ⁻¹μ_k
  Vector bias;         // −½ μ_kᵀΣ⁻¹μ_k + log π_k
  Vector priors;
  double gamma = 1e-3;

  std::size_t n_classes() const noexcept { return priors.size(); }
  std::size_t dims() const noexcept { return weights.rows(); }
};

// Pooled within-class covariance plus γ·(trace/D)·I.
LdaModel lda_fit(const Matrix& features, std::span<const int> labels, int n_classes, double gamma = 1e-3);
Matrix lda_scores(const Matrix& features, const LdaModel& model);
// Argmax of the discriminant scores; ties go to the lowest class index.
std::vector<int> lda_predict(const Matrix& features, const LdaModel& model);

}  // namespace aad
