#pragma once

#include <optional>
#include <span>
#include <vector>

#include "aad/numerics.hpp"
#include "aad/preprocess.hpp"

namespace aad {

// Lagged design: entry(t, c·L + l) = x_c(t − l), zero for t − l < 0.
struct LaggedDesign {
  Matrix matrix;
  std::size_t lags = 0;
  std::size_t channels = 0;

  std::size_t length() const noexcept { return matrix.rows(); }
  std::size_t width() const noexcept { return matrix.cols(); }
};

// Unnormalized second-order statistics summed over training windows.
// The envelope-lag blocks (ryy, rxy_mat) are present only when lagged
// targets were supplied.
struct CovStats {
  SymMatrix rxx;
  Vector rxy;
  std::optional<SymMatrix> ryy;
  std::optional<Matrix> rxy_mat;
  std::size_t rows = 0;
  std::size_t lags = 0;
  std::size_t channels = 0;
  std::size_t target_lags = 0;

  CovStats& operator+=(const CovStats& other);
};

LaggedDesign build_lagged(const MultichannelSignal& x, std::size_t lags);
LaggedDesign build_lagged(const Matrix& samples, std::size_t lags);
LaggedDesign build_lagged(std::span<const double> x, std::size_t lags);

// Row mask: rows with mask[t] == false are left out of every sum.
using RowMask = std::vector<bool>;

// rxx = Σ XᵀX, rxy = Σ Xᵀy.
CovStats accumulate(std::span<const LaggedDesign> designs, std::span<const Vector> targets,
                    std::span<const RowMask> masks = {});

// Adds ryy = Σ YᵀY and rxy_mat = Σ XᵀY from lagged targets; rxy holds column 0 of rxy_mat.
CovStats accumulate(std::span<const LaggedDesign> designs, std::span<const LaggedDesign> targets,
                    std::span<const RowMask> masks = {});

}  // namespace aad
