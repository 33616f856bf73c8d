#pragma once

#include <random>

#include "wclab/operator.hpp"

namespace wclab::testing {

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

inline Vector random_unit(std::mt19937_64& rng, Eigen::Index n) {
  Vector v = random_vector(rng, n);
  return v / v.norm();
}

// Row-major flattening of a matrix, the channel layout of matrix fields.
inline Vector flatten(const Matrix& m) {
  Vector v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v(i * m.cols() + j) = m(i, j);
  return v;
}

// Upper-triangular row-major storage of a symmetric matrix.
inline Vector symmetric_channels(const Matrix& s) {
  const int d = static_cast<int>(s.rows());
  Vector v(d * (d + 1) / 2);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) v(symmetric_channel(d, i, j)) = s(i, j);
  return v;
}

}  // namespace wclab::testing
