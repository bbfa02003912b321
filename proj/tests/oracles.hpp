#pragma once

// Independent reference computations for the tests. Nothing here calls the
// SDP machinery; each oracle uses a different route to the same quantity.

#include <datalmi/linalg.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>

namespace oracle {

using datalmi::Matrix;
using datalmi::Vector;

struct Lqr {
  Matrix P;
  Matrix K;  // u = K x
};

/// Discrete Riccati by value iteration from P = Q until the update stalls.
inline Lqr riccati_fixed_point(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                               int max_iter = 1000000) {
  Matrix P = Q;
  for (int i = 0; i < max_iter; ++i) {
    const Matrix G = R + B.transpose() * P * B;
    const Matrix next = Q + A.transpose() * P * A - A.transpose() * P * B * G.ldlt().solve(B.transpose() * P * A);
    const double change = (next - P).norm();
    P = datalmi::symmetrize(next);
    if (change <= 1e-15 * std::max(1.0, P.norm())) break;
  }
  const Matrix K = -(R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
  return {P, K};
}

/// P solving P = A_cl^T P A_cl + M by Kronecker vectorization (A_cl Schur stable).
inline Matrix lyapunov(const Matrix& Acl, const Matrix& M) {
  const auto n = Acl.rows();
  const Matrix At = Acl.transpose();
  Matrix kron(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) kron.block(i * n, j * n, n, n) = At(i, j) * At;
  const Matrix lhs = Matrix::Identity(n * n, n * n) - kron;
  const Vector vec = lhs.fullPivLu().solve(M.reshaped());
  return datalmi::symmetrize(vec.reshaped(n, n));
}

/// Infinite-horizon cost sum_j x_j^T (Q + K^T R K) x_j of x+ = (A + B K) x, truncated below 1e-9.
inline double simulated_cost(const Matrix& A, const Matrix& B, const Matrix& K, const Matrix& Q, const Matrix& R,
                             Vector x, int max_steps = 1000000) {
  const Matrix stage = Q + K.transpose() * R * K;
  const Matrix Acl = A + B * K;
  double j = 0.0;
  for (int k = 0; k < max_steps && x.norm() >= 1e-9; ++k) {
    j += x.dot(stage * x);
    x = Acl * x;
  }
  return j;
}

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = d(rng);
  return m;
}

}  // namespace oracle
