#pragma once

#include <optional>
#include <vector>

#include "dre/types.hpp"

namespace dre {

/// Solves F^T X + X F + Q = 0 by Bartels-Stewart on the real Schur form of F.
/// Throws SpectrumIncompatible when lambda_i + lambda_j ~ 0 for some pair.
Matrix solve_lyapunov(const Matrix& F, const Matrix& Q);

/// Relative residual ||F^T X + X F + Q||_F / (2 ||F||_F ||X||_F + ||Q||_F).
double lyapunov_residual(const Matrix& F, const Matrix& Q, const Matrix& X);

struct CareOptions {
  double tol = 1e-12;
  int maxit = 50;
  /// After convergence, one more Newton step is taken (and kept only if it
  /// lowers the residual) while the residual is above polish * tol.
  double polish = 1e-2;
};

struct CareResult {
  Matrix X;
  int iterations = 0;
  double residual = 0.0;               // final relative residual
  std::vector<double> residual_history;  // residual of every iterate, starting guess first
  double closed_loop_abscissa = 0.0;   // max Re eig(A - B B^T X) of the last linearization
};

/// Stabilizing solution of A^T X + X A - X B B^T X + Q = 0 by Newton-Kleinman.
///
/// Q may be indefinite. The start is `X_init` when given (replaced by 0 when it
/// does not stabilize and A is stable), otherwise 0 when A
/// is stable, otherwise a Bass-type stabilizing guess. Throws
/// NoStabilizingGuess when the start does not stabilize A - B B^T X, and
/// MaxIterations when the residual does not reach `tol`.
CareResult solve_care(const Matrix& A, const Matrix& B, const Matrix& Q,
                      const std::optional<Matrix>& X_init = std::nullopt,
                      const CareOptions& options = {});

/// Relative residual ||A^T X + X A - X B B^T X + Q||_F scaled by the size of
/// its terms.
double care_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& X);

/// One Newton-Kleinman update: solves
///   (A - B B^T Xp)^T X + X (A - B B^T Xp) + Xp B B^T Xp + Q = 0.
Matrix newton_kleinman_step(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& Xp);

/// Bass-type initial guess X0 = P^{-1} with (A + bI) P + P (A + bI)^T = 2 B B^T,
/// b > spectral radius of A. Throws NoStabilizingGuess if P is not definite.
Matrix stabilizing_guess(const Matrix& A, const Matrix& B);

/// Largest real part of the eigenvalues of M.
double spectral_abscissa(const Matrix& M);

/// Matrix exponential (scaling and squaring with Pade approximants).
Matrix matrix_exponential(const Matrix& M);

/// Symmetric truncated factorization Y ~ U diag(sign .* sigma) U^T keeping
/// |eigenvalues| > dtol * sigma_max, ordered by decreasing magnitude.
struct TruncatedFactor {
  Matrix U;
  Vector sigma;
  Vector sign;  // +1 / -1; all +1 for PSD input
  double dtol = 0.0;

  Index rank() const { return sigma.size(); }
  Matrix reconstruct() const;
};

TruncatedFactor truncate_svd(const Matrix& Y, double dtol);

}  // namespace dre
