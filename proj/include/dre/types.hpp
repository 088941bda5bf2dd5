#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace dre {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Triplet = Eigen::Triplet<double>;
using MatrixLd = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

// Frobenius inner product <U, W>.
inline double frobenius_dot(const Matrix& U, const Matrix& W) {
  return (U.array() * W.array()).sum();
}

inline Matrix symmetrized(const Matrix& M) { return 0.5 * (M + M.transpose()); }

// Spectral norm of a (small) dense matrix.
inline double spectral_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

}  // namespace dre
