#include "doctest.h"

#include <cmath>

#include "aad/numerics.hpp"
#include "test_util.hpp"

using namespace aad;
using testutil::random_matrix;
using testutil::random_spd;

namespace {

// Plain Gaussian elimination with partial pivoting.
Vector gauss_solve(Matrix a, Vector b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
    std::swap(b[k], b[p]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      b[i] -= f * b[k];
    }
  }
  Vector x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
    x[i] = s / a(i, i);
  }
  return x;
}

Matrix reconstruct(const EigPairs& e) {
  const std::size_t n = e.values.size();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) d(i, i) = e.values[i];
  return e.vectors * d * e.vectors.transpose();
}

}  // namespace

TEST_CASE("solve_regularized on identity") {
  const Vector b{1.0, 2.0};
  const Vector x0 = solve_regularized(SymMatrix::identity(2), b, 0.0);
  CHECK(x0[0] == doctest::Approx(1.0));
  CHECK(x0[1] == doctest::Approx(2.0));
  const Vector x1 = solve_regularized(SymMatrix::identity(2), b, 1.0);
  CHECK(x1[0] == doctest::Approx(0.5));
  CHECK(x1[1] == doctest::Approx(1.0));
}

TEST_CASE("solve_regularized matches Gaussian elimination") {
  std::mt19937_64 rng(1);
  const SymMatrix a = random_spd(rng, 5);
  const Vector b = testutil::random_vector(rng, 5);
  const Vector x = solve_regularized(a, b, 0.1);
  const Vector ref = gauss_solve(a.plus_diagonal(0.1).matrix(), b);
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(x[i] - ref[i]) < 1e-10 * (1.0 + std::abs(ref[i])));
}

TEST_CASE("solve_regularized rejects singular systems and bad shapes") {
  const SymMatrix singular(Matrix{{1.0, 1.0}, {1.0, 1.0}});
  const Vector b{1.0, 2.0};
  CHECK_THROWS_AS(solve_regularized(singular, b, 0.0), Error);
  try {
    solve_regularized(singular, b, 0.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularSystem);
  }
  const Vector short_b{1.0};
  try {
    solve_regularized(SymMatrix::identity(2), short_b, 0.0);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("ridge shrinkage is monotone in lambda") {
  std::mt19937_64 rng(2);
  const Matrix a = random_matrix(rng, 4, 6);
  const SymMatrix psd = SymMatrix::symmetrize(transpose_times(a, a));  // rank 4 of 6
  const Vector b = testutil::random_vector(rng, 6);
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0}) {
    const double n = norm2(solve_regularized(psd, b, lambda));
    CHECK(n <= prev + 1e-12);
    prev = n;
  }
}

TEST_CASE("sym_eig basics") {
  const Vector d{3.0, 1.0};
  const EigPairs e = sym_eig(SymMatrix::diagonal(d));
  CHECK(e.values[0] == doctest::Approx(3.0));
  CHECK(e.values[1] == doctest::Approx(1.0));
  CHECK(std::abs(e.vectors(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(e.vectors(1, 1)) == doctest::Approx(1.0));

  const EigPairs id = sym_eig(SymMatrix::identity(3));
  for (double v : id.values) CHECK(v == doctest::Approx(1.0));
  CHECK(testutil::max_abs_diff(reconstruct(id), Matrix::identity(3)) < 1e-15);
}

TEST_CASE("sym_eig against an Eigen oracle") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 5; ++rep) {
    const SymMatrix s = SymMatrix::symmetrize(random_matrix(rng, 6, 6));
    const EigPairs e = sym_eig(s);
    CHECK(testutil::max_abs_diff(reconstruct(e), s.matrix()) < 1e-9);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(testutil::to_eigen(s.matrix()));
    for (int i = 0; i < 6; ++i) CHECK(e.values[i] == doctest::Approx(ref.eigenvalues()(5 - i)).epsilon(1e-10));
    double sum = 0.0;
    for (double v : e.values) sum += v;
    CHECK(std::abs(sum - s.trace()) <= 1e-9 * std::max(1.0, std::abs(s.trace())));
    for (std::size_t i = 1; i < e.values.size(); ++i) CHECK(e.values[i] <= e.values[i - 1]);
  }
}

TEST_CASE("gen_sym_eig") {
  const Vector d21{2.0, 1.0}, d12{1.0, 2.0};
  const EigPairs a = gen_sym_eig(SymMatrix::diagonal(d21), SpdMatrix(SymMatrix::identity(2)));
  CHECK(a.values[0] == doctest::Approx(2.0));
  CHECK(a.values[1] == doctest::Approx(1.0));
  const EigPairs b = gen_sym_eig(SymMatrix::diagonal(d21), SpdMatrix(SymMatrix::diagonal(d12)));
  CHECK(b.values[0] == doctest::Approx(2.0));
  CHECK(b.values[1] == doctest::Approx(0.5));

  std::mt19937_64 rng(4);
  const SymMatrix A = random_spd(rng, 8), B = random_spd(rng, 8);
  const EigPairs g = gen_sym_eig(A, SpdMatrix(B));
  for (std::size_t k = 0; k < 8; ++k) {
    const Vector v = g.vectors.column(k);
    const Vector av = A.matrix() * std::span<const double>(v);
    const Vector bv = B.matrix() * std::span<const double>(v);
    double r = 0.0;
    for (std::size_t i = 0; i < 8; ++i) r += std::pow(av[i] - g.values[k] * bv[i], 2);
    CHECK(std::sqrt(r) < 1e-8 * std::max(1.0, norm2(av)));
  }

  const SymMatrix s = SymMatrix::symmetrize(random_matrix(rng, 5, 5));
  const EigPairs plain = sym_eig(s);
  const EigPairs gen = gen_sym_eig(s, SpdMatrix(SymMatrix::identity(5)));
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(plain.values[i] - gen.values[i]) < 1e-9);
}

TEST_CASE("SpdMatrix rejects indefinite input") {
  const SymMatrix indef(Matrix{{1.0, 2.0}, {2.0, 1.0}});
  try {
    SpdMatrix bad(indef);
    FAIL("expected NotSpd");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotSpd);
  }
  try {
    SymMatrix asym(Matrix{{1.0, 2.0}, {0.0, 1.0}});
    FAIL("expected NotSymmetric");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotSymmetric);
  }
}

TEST_CASE("svd") {
  const SvdResult d = svd(Matrix{{3.0, 0.0}, {0.0, 2.0}, {0.0, 0.0}});
  CHECK(d.s[0] == doctest::Approx(3.0));
  CHECK(d.s[1] == doctest::Approx(2.0));
  const SvdResult z = svd(Matrix(3, 2));
  for (double v : z.s) CHECK(v == 0.0);

  std::mt19937_64 rng(5);
  for (auto [r, c] : {std::pair{10, 6}, std::pair{4, 7}}) {
    const Matrix m = random_matrix(rng, r, c);
    const SvdResult s = svd(m);
    const std::size_t k = s.s.size();
    Matrix sd(k, k);
    for (std::size_t i = 0; i < k; ++i) sd(i, i) = s.s[i];
    CHECK(testutil::max_abs_diff(s.u * sd * s.v.transpose(), m) < 1e-9);
    // Oracle: singular values are square roots of eigenvalues of MᵀM.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ev(testutil::to_eigen(transpose_times(m, m)));
    for (std::size_t i = 0; i < k; ++i)
      CHECK(s.s[i] == doctest::Approx(std::sqrt(std::max(0.0, ev.eigenvalues()(c - 1 - i)))).epsilon(1e-9));
  }
}

TEST_CASE("spd_function") {
  const Vector d{4.0, 9.0};
  const SymMatrix is = spd_function(SymMatrix::diagonal(d), SpdFunction::InvSqrt);
  CHECK(is(0, 0) == doctest::Approx(0.5));
  CHECK(is(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(is(0, 1) == doctest::Approx(0.0));

  CHECK(spd_function(SymMatrix::identity(3), SpdFunction::Log).matrix().frobenius_norm() < 1e-15);
  const SymMatrix zero = SymMatrix::symmetrize(Matrix(3, 3));
  CHECK(testutil::max_abs_diff(spd_function(zero, SpdFunction::ExpOfSym).matrix(), Matrix::identity(3)) < 1e-15);

  std::mt19937_64 rng(6);
  const SymMatrix s = random_spd(rng, 5);
  const SymMatrix round = spd_function(spd_function(s, SpdFunction::Log), SpdFunction::ExpOfSym);
  CHECK(testutil::max_abs_diff(round.matrix(), s.matrix()) < 1e-9 * s.trace());
  const SymMatrix r = spd_function(s, SpdFunction::Sqrt);
  CHECK(testutil::max_abs_diff(r.matrix() * r.matrix(), s.matrix()) < 1e-8 * s.trace());

  const SymMatrix indef(Matrix{{1.0, 2.0}, {2.0, 1.0}});
  CHECK_THROWS_AS(spd_function(indef, SpdFunction::Log), Error);
}

TEST_CASE("error categories") {
  CHECK(category_of(ErrorCode::BadConfig) == ErrorCategory::Config);
  CHECK(category_of(ErrorCode::ManifestError) == ErrorCategory::Data);
  CHECK(category_of(ErrorCode::IoError) == ErrorCategory::Io);
  CHECK(category_of(ErrorCode::SingularSystem) == ErrorCategory::Numerical);
  CHECK(std::string(to_string(ErrorCode::NotSpd)) == "NotSpd");
}
