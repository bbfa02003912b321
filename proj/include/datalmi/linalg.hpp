#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>

namespace datalmi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline double min_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double max_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

inline double spectral_radius(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Symmetric square root of a PSD matrix; negative eigenvalues are clipped to zero.
inline Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  Vector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

/// Number of singular values above rel_tol * sigma_max.
inline int numerical_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  return static_cast<int>((s.array() > rel_tol * s(0)).count());
}

/// Orthonormal columns spanning {z : z^T m = 0}, with the same rank rule as numerical_rank.
inline Matrix left_null_space(const Matrix& m, double rel_tol) {
  const auto rows = m.rows();
  if (m.cols() == 0) return Matrix::Identity(rows, rows);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU);
  const Vector& s = svd.singularValues();
  const int r = (s.size() == 0 || s(0) <= 0.0) ? 0 : static_cast<int>((s.array() > rel_tol * s(0)).count());
  return svd.matrixU().rightCols(rows - r);
}

}  // namespace datalmi
