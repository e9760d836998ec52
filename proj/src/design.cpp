#include "aad/design.hpp"

namespace aad {

LaggedDesign build_lagged(const Matrix& samples, std::size_t lags) {
  const std::size_t t_len = samples.rows();
  const std::size_t n_ch = samples.cols();
  if (lags < 1 || lags > t_len) throw Error(ErrorCode::BadLag, "lag count must satisfy 1 <= L <= T");
  LaggedDesign d{Matrix(t_len, lags * n_ch), lags, n_ch};
  for (std::size_t t = 0; t < t_len; ++t) {
    auto row = d.matrix.row(t);
    for (std::size_t c = 0; c < n_ch; ++c)
      for (std::size_t l = 0; l < lags && l <= t; ++l) row[c * lags + l] = samples(t - l, c);
  }
  return d;
}

LaggedDesign build_lagged(const MultichannelSignal& x, std::size_t lags) { return build_lagged(x.samples, lags); }

LaggedDesign build_lagged(std::span<const double> x, std::size_t lags) {
  Matrix m(x.size(), 1);
  for (std::size_t t = 0; t < x.size(); ++t) m(t, 0) = x[t];
  return build_lagged(m, lags);
}

CovStats& CovStats::operator+=(const CovStats& other) {
  if (rxx.n() != other.rxx.n() || rxy.size() != other.rxy.size() || ryy.has_value() != other.ryy.has_value())
    throw Error(ErrorCode::DimensionMismatch, "covariance statistics have different shapes");
  rxx = SymMatrix::symmetrize(rxx.matrix() + other.rxx.matrix());
  for (std::size_t i = 0; i < rxy.size(); ++i) rxy[i] += other.rxy[i];
  if (ryy) {
    if (ryy->n() != other.ryy->n()) throw Error(ErrorCode::DimensionMismatch, "target lag counts differ");
    ryy = SymMatrix::symmetrize(ryy->matrix() + other.ryy->matrix());
    *rxy_mat = *rxy_mat + *other.rxy_mat;
  }
  rows += other.rows;
  return *this;
}

namespace {

void check_mask(std::span<const RowMask> masks, std::size_t i, std::size_t rows) {
  if (!masks.empty() && masks[i].size() != rows)
    throw Error(ErrorCode::DimensionMismatch, "row mask length differs from design length");
}

bool keep(std::span<const RowMask> masks, std::size_t i, std::size_t t) { return masks.empty() || masks[i][t]; }

// Upper-triangle rank-one accumulation of rows of a into gram, then mirror.
void add_gram(Matrix& gram, const Matrix& a, std::span<const RowMask> masks, std::size_t idx) {
  const std::size_t n = a.cols();
  for (std::size_t t = 0; t < a.rows(); ++t) {
    if (!keep(masks, idx, t)) continue;
    auto r = a.row(t);
    for (std::size_t i = 0; i < n; ++i) {
      const double ri = r[i];
      if (ri == 0.0) continue;
      auto gi = gram.row(i);
      for (std::size_t j = i; j < n; ++j) gi[j] += ri * r[j];
    }
  }
}

SymMatrix mirror(Matrix& gram) {
  for (std::size_t i = 0; i < gram.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j) gram(i, j) = gram(j, i);
  return SymMatrix::symmetrize(gram);
}

void check_designs(std::span<const LaggedDesign> designs, std::size_t n_targets) {
  if (designs.empty()) throw Error(ErrorCode::DimensionMismatch, "no designs to accumulate");
  if (designs.size() != n_targets) throw Error(ErrorCode::DimensionMismatch, "design and target counts differ");
  for (const auto& d : designs)
    if (d.width() != designs.front().width() || d.lags != designs.front().lags)
      throw Error(ErrorCode::DimensionMismatch, "designs have inconsistent lag or channel counts");
}

}  // namespace

CovStats accumulate(std::span<const LaggedDesign> designs, std::span<const Vector> targets,
                    std::span<const RowMask> masks) {
  check_designs(designs, targets.size());
  const std::size_t w = designs.front().width();
  std::optional<CovStats> total;
  for (std::size_t i = 0; i < designs.size(); ++i) {
    const Matrix& x = designs[i].matrix;
    if (targets[i].size() != x.rows()) throw Error(ErrorCode::DimensionMismatch, "target length differs from design");
    check_mask(masks, i, x.rows());
    Matrix gram(w, w);
    Vector rxy(w, 0.0);
    std::size_t rows = 0;
    add_gram(gram, x, masks, i);
    for (std::size_t t = 0; t < x.rows(); ++t) {
      if (!keep(masks, i, t)) continue;
      ++rows;
      const double y = targets[i][t];
      auto r = x.row(t);
      for (std::size_t k = 0; k < w; ++k) rxy[k] += r[k] * y;
    }
    CovStats window{mirror(gram), std::move(rxy), std::nullopt, std::nullopt, rows, designs.front().lags,
                    designs.front().channels, 0};
    if (total)
      *total += window;
    else
      total = std::move(window);
  }
  return std::move(*total);
}

CovStats accumulate(std::span<const LaggedDesign> designs, std::span<const LaggedDesign> targets,
                    std::span<const RowMask> masks) {
  check_designs(designs, targets.size());
  const std::size_t w = designs.front().width();
  const std::size_t wy = targets.front().width();
  std::optional<CovStats> total;
  for (std::size_t i = 0; i < designs.size(); ++i) {
    const Matrix& x = designs[i].matrix;
    const Matrix& y = targets[i].matrix;
    if (y.rows() != x.rows() || y.cols() != wy)
      throw Error(ErrorCode::DimensionMismatch, "lagged target shape differs from design");
    check_mask(masks, i, x.rows());
    Matrix gram(w, w);
    Matrix gram_y(wy, wy);
    Matrix cross(w, wy);
    std::size_t rows = 0;
    add_gram(gram, x, masks, i);
    add_gram(gram_y, y, masks, i);
    for (std::size_t t = 0; t < x.rows(); ++t) {
      if (!keep(masks, i, t)) continue;
      ++rows;
      auto xr = x.row(t);
      auto yr = y.row(t);
      for (std::size_t k = 0; k < w; ++k) {
        const double xk = xr[k];
        if (xk == 0.0) continue;
        auto ck = cross.row(k);
        for (std::size_t j = 0; j < wy; ++j) ck[j] += xk * yr[j];
      }
    }
    CovStats window{mirror(gram), cross.column(0),      mirror(gram_y),           std::move(cross),
                    rows,         designs.front().lags, designs.front().channels, wy};
    if (total)
      *total += window;
    else
      total = std::move(window);
  }
  return std::move(*total);
}

}  // namespace aad
