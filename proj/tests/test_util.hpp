#pragma once

#include <Eigen/Dense>
#include <random>

#include "aad/numerics.hpp"

namespace testutil {

inline aad::Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> n01;
  aad::Matrix m(rows, cols);
  for (double& v : m.data()) v = n01(rng);
  return m;
}

inline aad::Vector random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> n01;
  aad::Vector v(n);
  for (double& x : v) x = n01(rng);
  return v;
}

inline aad::SymMatrix random_spd(std::mt19937_64& rng, std::size_t n) {
  const aad::Matrix a = random_matrix(rng, n + 3, n);
  return aad::SymMatrix::symmetrize(aad::transpose_times(a, a)).plus_diagonal(0.1);
}

inline Eigen::MatrixXd to_eigen(const aad::Matrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

inline aad::Matrix from_eigen(const Eigen::MatrixXd& m) {
  aad::Matrix out(m.rows(), m.cols());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

inline double max_abs_diff(const aad::Matrix& a, const aad::Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

}  // namespace testutil
