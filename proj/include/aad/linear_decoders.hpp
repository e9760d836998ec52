#pragma once

#include <span>

#include "aad/design.hpp"
#include "aad/numerics.hpp"

namespace aad {

// Backward (stimulus-reconstruction) model: ŷ = X_lag · w.
struct WfModel {
  Vector w;
  double lambda = 0.0;
  std::size_t lags = 0;
  std::size_t channels = 0;
};

struct CcaModel {
  Matrix wx;           // (lags·channels) × n_components
  Matrix wy;           // target_lags × n_components
  Vector correlations;  // non-increasing, clipped to [0, 1]
  double reg = 0.0;
  std::size_t lags = 0;
  std::size_t channels = 0;
  std::size_t target_lags = 0;

  std::size_t n_components() const noexcept { return correlations.size(); }
};

struct ChannelWeightStats {
  Vector max_abs;
  Vector mean_sq;
};

WfModel wf_fit(const CovStats& stats, double lambda);
Vector wf_predict(const LaggedDesign& x, const WfModel& model);

// Eigendecompositions of rxx and ryy, reusable across regularization values.
struct CcaBasis {
  EigPairs xx;
  EigPairs yy;
};
CcaBasis cca_basis(const CovStats& stats);

CcaModel cca_fit(const CovStats& stats, double reg, std::size_t n_components);
CcaModel cca_fit(const CovStats& stats, const CcaBasis& basis, double reg, std::size_t n_components);

// Per-component canonical projections; column i = X·wx_i.
Matrix cca_project_eeg(const LaggedDesign& x, const CcaModel& model);
Matrix cca_project_target(const LaggedDesign& y, const CcaModel& model);

// Σ_{i < n_components} PCC(X·wx_i, Y·wy_i).
double cca_score(const LaggedDesign& x, const LaggedDesign& y, const CcaModel& model);

// Per channel: max_l |w_c(l)| and mean_l w_c(l)².
ChannelWeightStats channel_weight_stats(std::span<const double> w, std::size_t lags, std::size_t channels);
ChannelWeightStats channel_weight_stats(const WfModel& model);
// Uses the first EEG-side canonical component.
ChannelWeightStats channel_weight_stats(const CcaModel& model);

}  // namespace aad
