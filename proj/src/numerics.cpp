#include "aad/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace aad {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NotSpd: return "NotSpd";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::InvalidBand: return "InvalidBand";
    case ErrorCode::IrrationalRatio: return "IrrationalRatio";
    case ErrorCode::BadChannelIndex: return "BadChannelIndex";
    case ErrorCode::BadLag: return "BadLag";
    case ErrorCode::DegenerateClass: return "DegenerateClass";
    case ErrorCode::SingularScatter: return "SingularScatter";
    case ErrorCode::BadProtocolConfig: return "BadProtocolConfig";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ManifestError: return "ManifestError";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidBand:
    case ErrorCode::IrrationalRatio:
    case ErrorCode::BadChannelIndex:
    case ErrorCode::BadLag:
    case ErrorCode::BadProtocolConfig:
    case ErrorCode::EmptyGrid:
    case ErrorCode::BadConfig:
      return ErrorCategory::Config;
    case ErrorCode::ManifestError:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::UnknownTask:
    case ErrorCode::LengthMismatch:
    case ErrorCode::DimensionMismatch:
      return ErrorCategory::Data;
    case ErrorCode::IoError:
      return ErrorCategory::Io;
    default:
      return ErrorCategory::Numerical;
  }
}

// ---------------------------------------------------------------------------
// Matrix

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) {
      throw Error(ErrorCode::DimensionMismatch, "ragged matrix initializer");
    }
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Vector Matrix::column(std::size_t c) const {
  Vector v(rows_);
  for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
  return v;
}

void Matrix::set_column(std::size_t c, std::span<const double> v) {
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double Matrix::frobenius_norm() const { return norm2(data_); }

double Matrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
  return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error(ErrorCode::DimensionMismatch, "matrix product");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Vector operator*(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw Error(ErrorCode::DimensionMismatch, "matrix-vector product");
  Vector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::DimensionMismatch, "matrix sum");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::DimensionMismatch, "matrix difference");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

Matrix transpose_times(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw Error(ErrorCode::DimensionMismatch, "transpose product");
  Matrix c(a.cols(), b.cols());
  for (std::size_t t = 0; t < a.rows(); ++t) {
    auto at = a.row(t);
    auto bt = b.row(t);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ai = at[i];
      if (ai == 0.0) continue;
      auto ci = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += ai * bt[j];
    }
  }
  return c;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// ---------------------------------------------------------------------------
// SymMatrix / SpdMatrix

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw Error(ErrorCode::DimensionMismatch, "symmetric matrix must be square and nonempty");
  double scale = 0.0;
  for (double v : m.data()) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-10 * scale)
        throw Error(ErrorCode::NotSymmetric, "matrix is not symmetric");
  *this = symmetrize(m);
}

SymMatrix SymMatrix::identity(std::size_t n) { return symmetrize(Matrix::identity(n)); }

SymMatrix SymMatrix::diagonal(std::span<const double> d) {
  return symmetrize(Matrix::diagonal(d));
}

SymMatrix SymMatrix::symmetrize(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw Error(ErrorCode::DimensionMismatch, "symmetric matrix must be square and nonempty");
  SymMatrix s;
  s.m_ = m;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      s.m_(i, j) = v;
      s.m_(j, i) = v;
    }
  return s;
}

SymMatrix SymMatrix::plus_diagonal(double lambda) const {
  SymMatrix s = *this;
  for (std::size_t i = 0; i < n(); ++i) s.m_(i, i) += lambda;
  return s;
}

namespace {

double spd_tolerance(const Vector& values) {
  const double tr = std::accumulate(values.begin(), values.end(), 0.0);
  return 1e-12 * tr / static_cast<double>(values.size());
}

}  // namespace

bool is_spd(const EigPairs& eig) {
  const double tol = spd_tolerance(eig.values);
  if (!(tol > 0.0)) return false;
  return eig.values.back() > tol;
}

SpdMatrix::SpdMatrix(SymMatrix s) : base_(std::move(s)) {
  if (!is_spd(sym_eig(base_))) throw Error(ErrorCode::NotSpd, "matrix is not positive definite");
}

// ---------------------------------------------------------------------------
// Solvers

Vector solve_regularized(const SymMatrix& a, std::span<const double> b, double lambda) {
  const std::size_t n = a.n();
  if (b.size() != n) throw Error(ErrorCode::DimensionMismatch, "rhs length differs from matrix size");
  if (lambda < 0.0) throw Error(ErrorCode::BadConfig, "lambda must be nonnegative");

  Matrix l(n, n);
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i) + lambda));
  const double pivot_floor = 1e-13 * max_diag;

  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j) + lambda;
    auto lj = l.row(j);
    for (std::size_t k = 0; k < j; ++k) d -= lj[k] * lj[k];
    if (!(d > pivot_floor)) throw Error(ErrorCode::SingularSystem, "regularized system is singular");
    const double djj = std::sqrt(d);
    lj[j] = djj;
    for (std::size_t i = j + 1; i < n; ++i) {
      auto li = l.row(i);
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      li[j] = s / djj;
    }
  }

  auto chol_solve = [&](std::span<const double> rhs) {
    Vector y(rhs.begin(), rhs.end());
    for (std::size_t i = 0; i < n; ++i) {
      auto li = l.row(i);
      for (std::size_t k = 0; k < i; ++k) y[i] -= li[k] * y[k];
      y[i] /= li[i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
      for (std::size_t k = ii + 1; k < n; ++k) y[ii] -= l(k, ii) * y[k];
      y[ii] /= l(ii, ii);
    }
    return y;
  };

  Vector x = chol_solve(b);
  // One step of iterative refinement.
  Vector r(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = lambda * x[i];
    for (std::size_t k = 0; k < n; ++k) s += a(i, k) * x[k];
    r[i] -= s;
  }
  const Vector dx = chol_solve(r);
  for (std::size_t i = 0; i < n; ++i) x[i] += dx[i];
  return x;
}

namespace {

constexpr int kMaxSweeps = 100;

void sort_descending(Vector& values, Matrix& vectors) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] > values[j]; });
  Vector sorted(n);
  Matrix v(vectors.rows(), n);
  for (std::size_t k = 0; k < n; ++k) {
    sorted[k] = values[order[k]];
    for (std::size_t r = 0; r < vectors.rows(); ++r) v(r, k) = vectors(r, order[k]);
  }
  values = std::move(sorted);
  vectors = std::move(v);
}

}  // namespace

EigPairs sym_eig(const SymMatrix& s) {
  const std::size_t n = s.n();
  Matrix a = s.matrix();
  // Eigenvectors accumulated as rows of vt for cache-friendly rotations.
  Matrix vt = Matrix::identity(n);

  double total = 0.0;
  for (double v : a.data()) total += v * v;
  if (total == 0.0 || n == 1) {
    EigPairs out{Vector(n), Matrix::identity(n)};
    for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
    return out;
  }

  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-30 * total) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;

        auto rp = a.row(p);
        auto rq = a.row(q);
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = rp[k];
          const double akq = rq[k];
          rp[k] = c * akp - sn * akq;
          rq[k] = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;

        auto vp = vt.row(p);
        auto vq = vt.row(q);
        for (std::size_t k = 0; k < n; ++k) {
          const double x = vp[k];
          const double y = vq[k];
          vp[k] = c * x - sn * y;
          vq[k] = sn * x + c * y;
        }
      }
    }
  }
  if (!converged) throw Error(ErrorCode::NonConvergence, "Jacobi eigensolver did not converge");

  EigPairs out{Vector(n), vt.transpose()};
  for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
  sort_descending(out.values, out.vectors);
  return out;
}

EigPairs gen_sym_eig(const SymMatrix& a, const SpdMatrix& b) {
  if (a.n() != b.n()) throw Error(ErrorCode::DimensionMismatch, "generalized eigenproblem sizes differ");
  const SymMatrix w = spd_function(b.sym(), SpdFunction::InvSqrt);
  const SymMatrix c = SymMatrix::symmetrize(w.matrix() * a.matrix() * w.matrix());
  EigPairs e = sym_eig(c);
  e.vectors = w.matrix() * e.vectors;
  return e;
}

SvdResult svd(const Matrix& m) {
  for (double v : m.data())
    if (!std::isfinite(v)) throw Error(ErrorCode::NonConvergence, "svd input is not finite");

  if (m.rows() < m.cols()) {
    SvdResult t = svd(m.transpose());
    return {std::move(t.v), std::move(t.s), std::move(t.u)};
  }
  const std::size_t rows = m.rows();
  const std::size_t k = m.cols();

  // Work on columns stored as rows of the transpose.
  Matrix ut = m.transpose();
  Matrix vt = Matrix::identity(k);
  const double scale = m.frobenius_norm();

  bool converged = scale == 0.0;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        auto up = ut.row(p);
        auto uq = ut.row(q);
        const double alpha = dot(up, up);
        const double beta = dot(uq, uq);
        const double gamma = dot(up, uq);
        if (std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta) || gamma == 0.0) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < rows; ++i) {
          const double x = up[i];
          const double y = uq[i];
          up[i] = c * x - s * y;
          uq[i] = s * x + c * y;
        }
        auto vp = vt.row(p);
        auto vq = vt.row(q);
        for (std::size_t i = 0; i < k; ++i) {
          const double x = vp[i];
          const double y = vq[i];
          vp[i] = c * x - s * y;
          vq[i] = s * x + c * y;
        }
      }
    }
    if (!rotated) converged = true;
  }
  if (!converged) throw Error(ErrorCode::NonConvergence, "Jacobi SVD did not converge");

  Vector sv(k);
  for (std::size_t j = 0; j < k; ++j) sv[j] = norm2(ut.row(j));

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return sv[i] > sv[j]; });

  SvdResult out{Matrix(rows, k), Vector(k), Matrix(k, k)};
  const double tiny = 1e-14 * (sv.empty() ? 0.0 : sv[order[0]]);
  std::vector<bool> filled(k, false);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t src = order[j];
    out.s[j] = sv[src];
    for (std::size_t i = 0; i < k; ++i) out.v(i, j) = vt(src, i);
    if (sv[src] > tiny && sv[src] > 0.0) {
      for (std::size_t i = 0; i < rows; ++i) out.u(i, j) = ut(src, i) / sv[src];
      filled[j] = true;
    }
  }
  // Complete U with orthonormal directions where singular values vanish.
  std::size_t probe = 0;
  for (std::size_t j = 0; j < k; ++j) {
    if (filled[j]) continue;
    out.s[j] = 0.0;
    while (probe < rows) {
      Vector cand(rows, 0.0);
      cand[probe++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t jj = 0; jj < k; ++jj) {
          if (!filled[jj]) continue;
          double proj = 0.0;
          for (std::size_t i = 0; i < rows; ++i) proj += out.u(i, jj) * cand[i];
          for (std::size_t i = 0; i < rows; ++i) cand[i] -= proj * out.u(i, jj);
        }
      }
      const double nrm = norm2(cand);
      if (nrm > 1e-8) {
        for (std::size_t i = 0; i < rows; ++i) out.u(i, j) = cand[i] / nrm;
        filled[j] = true;
        break;
      }
    }
  }
  return out;
}

SymMatrix spd_function(const EigPairs& eig, SpdFunction f) {
  const std::size_t n = eig.values.size();
  if (f != SpdFunction::ExpOfSym && !is_spd(eig))
    throw Error(ErrorCode::NotSpd, "matrix function requires a positive definite argument");
  Vector g(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = eig.values[i];
    switch (f) {
      case SpdFunction::Log: g[i] = std::log(v); break;
      case SpdFunction::ExpOfSym: g[i] = std::exp(v); break;
      case SpdFunction::InvSqrt: g[i] = 1.0 / std::sqrt(v); break;
      case SpdFunction::Sqrt: g[i] = std::sqrt(v); break;
    }
  }
  Matrix r(n, n);
  const Matrix& v = eig.vectors;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += v(i, k) * g[k] * v(j, k);
      r(i, j) = s;
      r(j, i) = s;
    }
  return SymMatrix::symmetrize(r);
}

SymMatrix spd_function(const SymMatrix& s, SpdFunction f) { return spd_function(sym_eig(s), f); }

}  // namespace aad
