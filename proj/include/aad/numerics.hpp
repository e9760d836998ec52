#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "aad/error.hpp"

namespace aad {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> d);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  Vector column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> v);

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  Matrix transpose() const;
  double frobenius_norm() const;
  double trace() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, std::span<const double> x);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

// Aᵀ·B without forming the transpose.
Matrix transpose_times(const Matrix& a, const Matrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

// Symmetric matrix; entries are exactly mirrored.
class SymMatrix {
 public:
  SymMatrix() = default;
  // Throws NotSymmetric when |a_ij - a_ji| exceeds 1e-10 relative to max |a|;
  // otherwise stores the exactly symmetrized average.
  explicit SymMatrix(const Matrix& m);

  static SymMatrix identity(std::size_t n);
  static SymMatrix diagonal(std::span<const double> d);
  // Averages m with its transpose; never throws on asymmetry.
  static SymMatrix symmetrize(const Matrix& m);

  std::size_t n() const noexcept { return m_.rows(); }
  double operator()(std::size_t r, std::size_t c) const { return m_(r, c); }
  const Matrix& matrix() const noexcept { return m_; }

  SymMatrix plus_diagonal(double lambda) const;
  double trace() const { return m_.trace(); }

 private:
  Matrix m_;
};

class SpdMatrix {
 public:
  // Throws NotSpd unless every eigenvalue exceeds 1e-12 · trace / n.
  explicit SpdMatrix(SymMatrix s);

  const SymMatrix& sym() const noexcept { return base_; }
  const Matrix& matrix() const noexcept { return base_.matrix(); }
  std::size_t n() const noexcept { return base_.n(); }

 private:
  SymMatrix base_;
};

struct EigPairs {
  Vector values;   // descending
  Matrix vectors;  // columns are eigenvectors
};

struct SvdResult {
  Matrix u;  // m × k, k = min(m, n)
  Vector s;  // descending, nonnegative
  Matrix v;  // n × k
};

enum class SpdFunction { Log, ExpOfSym, InvSqrt, Sqrt };

// Solves (A + λI)x = b by Cholesky with one refinement step.
Vector solve_regularized(const SymMatrix& a, std::span<const double> b, double lambda);

// Cyclic Jacobi. Throws NonConvergence after the sweep cap.
EigPairs sym_eig(const SymMatrix& s);

// A·v = λ·B·v with B-orthonormal v, solved by whitening with B^{-1/2}.
EigPairs gen_sym_eig(const SymMatrix& a, const SpdMatrix& b);

// One-sided Jacobi SVD.
SvdResult svd(const Matrix& m);

SymMatrix spd_function(const SymMatrix& s, SpdFunction f);
SymMatrix spd_function(const EigPairs& eig, SpdFunction f);

// True when every eigenvalue exceeds the SPD tolerance.
bool is_spd(const EigPairs& eig);

}  // namespace aad
