#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dre/bdf.hpp"
#include "dre/extended_arnoldi.hpp"
#include "dre/problem.hpp"

namespace dre {

/// X ~ Z diag(signature) Z^T with signature entries +1 or -1.
struct SignedLowRankFactor {
  Matrix Z;
  Vector signature;

  Index n() const { return Z.rows(); }
  Index rank() const { return Z.cols(); }
  Matrix dense() const;

  static SignedLowRankFactor zero(Index n);
  static SignedLowRankFactor positive(const Matrix& Z);

  /// Minimal-rank factor of the same matrix: QR of Z, then a truncated
  /// eigen-decomposition of the small core keeping |lambda| > dtol * |lambda|_max.
  SignedLowRankFactor compressed(double dtol) const;
  /// Drops the negative part after compression.
  Matrix psd_factor(double dtol) const;
};

/// a X + b Y as a stacked (uncompressed) factor.
SignedLowRankFactor combine(double a, const SignedLowRankFactor& X, double b, const SignedLowRankFactor& Y);

/// h beta C^T C + sum_i alpha_i X_{k-i}, split by the sign of each column's weight:
/// the matrix equals positive positive^T - negative negative^T.
struct StackedConstantFactor {
  Matrix positive;
  Matrix negative;

  static StackedConstantFactor build(const Matrix& C, double hb,
                                     const std::vector<const SignedLowRankFactor*>& history,
                                     const BDFCoefficients& coeffs);
  Matrix dense() const;
};

/// M = F^T for F = S - curlyB curlyB^T X, where S is a factorized sparse
/// handle and X = Z diag(sig) Z^T. Applies are sparse plus low rank; solves use
/// the factorization of S with a Sherman-Morrison-Woodbury correction.
class ClosedLoopTransposed final : public KrylovOperator {
 public:
  ClosedLoopTransposed(const LinearOperator& S, const Matrix& curlyB, const SignedLowRankFactor& X);
  Index rows() const override { return S_.rows(); }
  Matrix apply(const Matrix& V) const override;
  Matrix solve(const Matrix& V) const override;

 private:
  const LinearOperator& S_;
  Matrix U_;  // X curlyB
  Matrix W_;  // curlyB
  Matrix SinvU_;
  Eigen::PartialPivLU<Matrix> capacitance_;
  bool low_rank_ = false;
};

struct LyapunovOptions {
  double tol = 1e-12;  // ||F^T X + X F + G G^T||_F / ||G G^T||_F
  int m_max = 60;
  double dtol = 1e-12;
};

struct LyapunovFactorResult {
  Matrix Z;  // X ~ Z Z^T
  Index basis_size = 0;
  int iterations = 0;
  double residual = 0.0;
  bool invariant = false;  // the basis spans an invariant subspace
};

/// F^T X + X F + G G^T = 0 by Galerkin projection on K^e_m(F^T, G), given M = F^T.
/// Columns that are numerically dependent are deflated from the basis.
/// Throws NotConverged and UnstableClosedLoop.
LyapunovFactorResult eba_lyapunov(const KrylovOperator& M, const Matrix& G, const LyapunovOptions& options = {});

/// One implicit BDF step of the full equation as a large CARE
///   curlyA^T X + X curlyA - X curlyB curlyB^T X + constant = 0,
/// curlyA = h beta A - I/2.
struct LargeCareStep {
  LinearOperator curlyA;
  Matrix curlyB;
  StackedConstantFactor constant;
};

LargeCareStep make_large_care_step(const LinearOperator& shifted, const Matrix& B, const Matrix& C,
                                   const std::vector<const SignedLowRankFactor*>& history, double h,
                                   const BDFCoefficients& coeffs);

/// Relative residual of the step CARE at a signed factor, measured exactly
/// through a QR of the stacked factors (same scaling as care_residual).
double large_care_residual(const LargeCareStep& step, const SignedLowRankFactor& X);

struct NewtonStepInfo {
  LyapunovFactorResult L1;
  LyapunovFactorResult L2;  // empty when every weight is positive
};

/// Newton-Kleinman update: X1 - X2 with
///   F^T X1 + X1 F + Xp curlyB curlyB^T Xp + positive positive^T = 0,
///   F^T X2 + X2 F + negative negative^T = 0,  F = curlyA - curlyB curlyB^T Xp.
SignedLowRankFactor newton_step_large(const LargeCareStep& step, const SignedLowRankFactor& Xp,
                                      const LyapunovOptions& options, NewtonStepInfo* info = nullptr);

struct BaselineStepLog {
  long k = 0;
  double t = 0.0;
  int order = 0;
  int newton_iterations = 0;
  double care_residual = 0.0;
  Index rank = 0;
  Index max_basis = 0;  // largest inner projection space of the step
};

struct BaselineSolution {
  Matrix Z;  // PSD factor of X(T_f)
  Index rank = 0;
  SignedLowRankFactor X_final;
  std::vector<double> times;
  std::vector<SignedLowRankFactor> samples;
  std::vector<BaselineStepLog> log;
  long reduced_steps = 0;
  long lyapunov_solves = 0;
  double seconds = 0.0;
};

struct BaselineOptions {
  long sample_stride = 0;
  LyapunovOptions lyapunov;
  int newton_maxit = 30;
};

/// BDF(p) on the full equation with low-rank Newton-Kleinman steps. A step of
/// order > 1 whose CARE has no stabilizing solution is redone with BDF(1).
/// Newton stops at max(care_tol, 10 dtol).
/// Throws StepFailure.
BaselineSolution solve_baseline(const DREProblem& problem, const SolverConfig& config,
                                const BaselineOptions& options = {});

/// CSV: k,t,order,newton_iterations,care_residual,rank,max_basis.
void write_baseline_log(const std::string& path, const std::vector<BaselineStepLog>& log);

}  // namespace dre
