#include "dre/dense_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include <unsupported/Eigen/MatrixFunctions>

#include "dre/errors.hpp"

namespace dre {

namespace {

struct SchurBlock {
  Index start;
  Index size;  // 1 or 2
};

std::vector<SchurBlock> schur_blocks(const Matrix& S) {
  std::vector<SchurBlock> blocks;
  const Index k = S.rows();
  for (Index i = 0; i < k;) {
    if (i + 1 < k && S(i + 1, i) != 0.0) {
      blocks.push_back({i, 2});
      i += 2;
    } else {
      blocks.push_back({i, 1});
      i += 1;
    }
  }
  return blocks;
}

std::vector<std::complex<double>> block_eigenvalues(const Matrix& S,
                                                    const std::vector<SchurBlock>& blocks) {
  std::vector<std::complex<double>> ev;
  ev.reserve(S.rows());
  for (const auto& b : blocks) {
    if (b.size == 1) {
      ev.emplace_back(S(b.start, b.start), 0.0);
    } else {
      const double a = S(b.start, b.start), bb = S(b.start, b.start + 1);
      const double c = S(b.start + 1, b.start), d = S(b.start + 1, b.start + 1);
      const double tr = 0.5 * (a + d);
      const double disc = 0.25 * (a - d) * (a - d) + bb * c;
      const std::complex<double> root = std::sqrt(std::complex<double>(disc, 0.0));
      ev.push_back(tr + root);
      ev.push_back(tr - root);
    }
  }
  return ev;
}

struct LyapunovSolve {
  Matrix X;
  double abscissa;
};

// Sylvester-type kernel  S^T Y + Y S = W  with S quasi upper triangular.
Matrix solve_quasi_triangular(const Matrix& S, const std::vector<SchurBlock>& blocks,
                              const Matrix& W) {
  const Index k = S.rows();
  Matrix Y = Matrix::Zero(k, k);
  for (const auto& cb : blocks) {
    const Index c0 = cb.start, nj = cb.size;
    Matrix rhs = W.middleCols(c0, nj);
    if (c0 > 0) rhs.noalias() -= Y.leftCols(c0) * S.block(0, c0, c0, nj);
    const Matrix Sjj = S.block(c0, c0, nj, nj);
    for (const auto& rb : blocks) {
      const Index r0 = rb.start, ni = rb.size;
      Matrix r = rhs.middleRows(r0, ni);
      if (r0 > 0)
        r.noalias() -= S.block(0, r0, r0, ni).transpose() * Y.block(0, c0, r0, nj);
      const Matrix Sii = S.block(r0, r0, ni, ni);
      if (ni == 1 && nj == 1) {
        Y(r0, c0) = r(0, 0) / (Sii(0, 0) + Sjj(0, 0));
        continue;
      }
      // vec(Sii^T Y + Y Sjj) = (I (x) Sii^T + Sjj^T (x) I) vec(Y)
      const Index q = ni * nj;
      Matrix K = Matrix::Zero(q, q);
      for (Index c = 0; c < nj; ++c)
        for (Index a = 0; a < ni; ++a)
          for (Index b = 0; b < ni; ++b) K(c * ni + a, c * ni + b) += Sii(b, a);
      for (Index c = 0; c < nj; ++c)
        for (Index d = 0; d < nj; ++d)
          for (Index a = 0; a < ni; ++a) K(c * ni + a, d * ni + a) += Sjj(d, c);
      Vector rv = Eigen::Map<const Vector>(r.data(), q);
      Vector y = K.fullPivLu().solve(rv);
      Y.block(r0, c0, ni, nj) = Eigen::Map<const Matrix>(y.data(), ni, nj);
    }
  }
  return Y;
}

LyapunovSolve lyapunov_with_abscissa(const Matrix& F, const Matrix& Q) {
  const Index k = F.rows();
  if (F.cols() != k || Q.rows() != k || Q.cols() != k)
    throw DimensionMismatch("solve_lyapunov: F and Q must be square of equal order");
  if (k == 0) return {Matrix(0, 0), -std::numeric_limits<double>::infinity()};

  Eigen::RealSchur<Matrix> schur(F);
  if (schur.info() != Eigen::Success) throw SpectrumIncompatible("real Schur form did not converge");
  const Matrix& S = schur.matrixT();
  const Matrix& U = schur.matrixU();
  const auto blocks = schur_blocks(S);
  const auto ev = block_eigenvalues(S, blocks);

  double abscissa = -std::numeric_limits<double>::infinity();
  double min_pair = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ev.size(); ++i) {
    abscissa = std::max(abscissa, ev[i].real());
    for (std::size_t j = i; j < ev.size(); ++j) min_pair = std::min(min_pair, std::abs(ev[i] + ev[j]));
  }
  const double scale = std::max(1.0, S.norm());
  if (min_pair <= 1e-12 * scale)
    throw SpectrumIncompatible("F has eigenvalues with lambda_i + lambda_j ~ 0 (min |sum| = " +
                               std::to_string(min_pair) + ")");

  const Matrix W = -(U.transpose() * Q * U);
  const Matrix Y = solve_quasi_triangular(S, blocks, W);
  return {symmetrized(U * Y * U.transpose()), abscissa};
}

double frob_or_one(double v) { return v > 0 ? v : 1.0; }

}  // namespace

Matrix solve_lyapunov(const Matrix& F, const Matrix& Q) { return lyapunov_with_abscissa(F, Q).X; }

double lyapunov_residual(const Matrix& F, const Matrix& Q, const Matrix& X) {
  const Matrix R = F.transpose() * X + X * F + Q;
  const double den = 2.0 * F.norm() * X.norm() + Q.norm();
  return den > 0 ? R.norm() / den : R.norm();
}

double care_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& X) {
  const Matrix AtX = A.transpose() * X;
  const Matrix BtX = B.transpose() * X;
  const Matrix quad = BtX.transpose() * BtX;
  const Matrix R = AtX + AtX.transpose() - quad + Q;
  const double den = 2.0 * AtX.norm() + quad.norm() + Q.norm();
  return R.norm() / frob_or_one(den);
}

Matrix newton_kleinman_step(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& Xp) {
  const Matrix BtX = B.transpose() * Xp;
  const Matrix closed = A - B * BtX;
  return solve_lyapunov(closed, BtX.transpose() * BtX + Q);
}

double spectral_abscissa(const Matrix& M) {
  if (M.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(M, false);
  return es.eigenvalues().real().maxCoeff();
}

Matrix stabilizing_guess(const Matrix& A, const Matrix& B) {
  const Index k = A.rows();
  const double shift = 1.01 * A.norm() + 1e-8;
  const Matrix Fs = (A + shift * Matrix::Identity(k, k)).transpose();
  Matrix P;
  try {
    P = solve_lyapunov(Fs, -2.0 * B * B.transpose());
  } catch (const SpectrumIncompatible&) {
    throw NoStabilizingGuess("Bass initialization: shifted Lyapunov equation is singular");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(P);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (!(lo > 1e-13 * std::max(hi, 1e-300)))
    throw NoStabilizingGuess("Bass initialization: (A, B) does not appear controllable");
  const Matrix X0 = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                    es.eigenvectors().transpose();
  return symmetrized(X0);
}

namespace {

void polish_newton(const Matrix& A, const Matrix& B, const Matrix& Q, CareResult& out) {
  const Matrix BtX = B.transpose() * out.X;
  LyapunovSolve step;
  try {
    step = lyapunov_with_abscissa(A - B * BtX, BtX.transpose() * BtX + Q);
  } catch (const Error&) {
    return;
  }
  if (step.abscissa >= 0.0) return;
  const double r = care_residual(A, B, Q, step.X);
  if (!(r < out.residual)) return;
  out.X = std::move(step.X);
  out.residual = r;
  out.closed_loop_abscissa = step.abscissa;
  out.residual_history.push_back(r);
  ++out.iterations;
}

// The start does not stabilize A - B B^T X.
class StartNotStabilizing : public NoStabilizingGuess {
 public:
  using NoStabilizingGuess::NoStabilizingGuess;
};

CareResult newton_care(const Matrix& A, const Matrix& B, const Matrix& Q, Matrix X0, const CareOptions& options) {
  const Index k = A.rows();
  CareResult out;
  out.X = std::move(X0);
  out.residual = care_residual(A, B, Q, out.X);
  out.residual_history.push_back(out.residual);
  if (out.residual <= options.tol) {
    out.closed_loop_abscissa = k ? spectral_abscissa(A - B * (B.transpose() * out.X)) : -1.0;
    if (out.closed_loop_abscissa >= 0.0)
      throw StartNotStabilizing("solve_care: start satisfies the equation but is not stabilizing");
    if (out.residual > options.polish * options.tol) polish_newton(A, B, Q, out);
    return out;
  }

  for (int it = 1; it <= options.maxit; ++it) {
    const Matrix BtX = B.transpose() * out.X;
    const Matrix closed = A - B * BtX;
    LyapunovSolve step;
    try {
      step = lyapunov_with_abscissa(closed, BtX.transpose() * BtX + Q);
    } catch (const SpectrumIncompatible& e) {
      if (it == 1) throw StartNotStabilizing(std::string("solve_care: start is not stabilizing: ") + e.what());
      throw;
    }
    if (it == 1 && step.abscissa >= 0.0)
      throw StartNotStabilizing("solve_care: A - B B^T X0 is not stable (abscissa " +
                                std::to_string(step.abscissa) + ")");
    // From a stabilizing start the iterates stay stabilizing whenever a
    // stabilizing solution exists, so losing stability means there is none.
    if (step.abscissa >= 0.0)
      throw NoStabilizingGuess("solve_care: Newton iterate " + std::to_string(it - 1) +
                               " is not stabilizing; no stabilizing solution");
    out.closed_loop_abscissa = step.abscissa;
    out.X = std::move(step.X);
    out.iterations = it;
    out.residual = care_residual(A, B, Q, out.X);
    out.residual_history.push_back(out.residual);
    if (!std::isfinite(out.residual)) break;
    if (out.residual <= options.tol) {
      if (out.residual > options.polish * options.tol) polish_newton(A, B, Q, out);
      return out;
    }
  }
  throw MaxIterations("solve_care: relative residual " + std::to_string(out.residual) +
                      " after " + std::to_string(out.iterations) + " Newton iterations");
}

}  // namespace

CareResult solve_care(const Matrix& A, const Matrix& B, const Matrix& Q,
                      const std::optional<Matrix>& X_init, const CareOptions& options) {
  const Index k = A.rows();
  if (A.cols() != k || B.rows() != k || Q.rows() != k || Q.cols() != k)
    throw DimensionMismatch("solve_care: inconsistent shapes");
  if (X_init) {
    if (X_init->rows() != k || X_init->cols() != k)
      throw DimensionMismatch("solve_care: warm start has wrong shape");
    try {
      return newton_care(A, B, Q, symmetrized(*X_init), options);
    } catch (const StartNotStabilizing&) {
      if (k == 0 || spectral_abscissa(A) >= 0.0) throw;
    }
    // A warm start that does not stabilize is replaced by X = 0 when A is stable.
    return newton_care(A, B, Q, Matrix::Zero(k, k), options);
  }
  if (k == 0 || spectral_abscissa(A) < 0.0) return newton_care(A, B, Q, Matrix::Zero(k, k), options);
  return newton_care(A, B, Q, stabilizing_guess(A, B), options);
}

Matrix matrix_exponential(const Matrix& M) {
  if (M.rows() != M.cols()) throw DimensionMismatch("matrix_exponential: M must be square");
  if (M.size() == 0) return M;
  return M.exp();
}

Matrix TruncatedFactor::reconstruct() const {
  return U * (sign.cwiseProduct(sigma)).asDiagonal() * U.transpose();
}

TruncatedFactor truncate_svd(const Matrix& Y, double dtol) {
  const Index k = Y.rows();
  if (Y.cols() != k) throw DimensionMismatch("truncate_svd: Y must be square");
  TruncatedFactor out;
  out.dtol = dtol;
  if (k == 0) {
    out.U = Matrix(0, 0);
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(Y));
  const Vector& lam = es.eigenvalues();
  std::vector<Index> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return std::abs(lam(a)) > std::abs(lam(b)); });
  const double smax = std::abs(lam(order[0]));
  Index keep = 0;
  if (smax > 0)
    while (keep < k && std::abs(lam(order[keep])) > dtol * smax) ++keep;
  out.U.resize(k, keep);
  out.sigma.resize(keep);
  out.sign.resize(keep);
  for (Index j = 0; j < keep; ++j) {
    out.U.col(j) = es.eigenvectors().col(order[j]);
    out.sigma(j) = std::abs(lam(order[j]));
    out.sign(j) = lam(order[j]) >= 0 ? 1.0 : -1.0;
  }
  return out;
}

}  // namespace dre
