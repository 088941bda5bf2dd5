#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dre/types.hpp"

namespace dre {

/// Instance of  dX/dt = A^T X + X A - X B B^T X + C^T C,  X(0) = Z0 Z0^T  on [0, T_f].
///
/// The coefficient is either a plain sparse matrix (`A`) or, when `E` is set,
/// the descriptor form E^{-1} A used by mass-matrix discretizations. In the
/// descriptor case the n x n coefficient is never formed.
struct DREProblem {
  SparseMatrix A;
  std::optional<SparseMatrix> E;
  Matrix B;   // n x l
  Matrix C;   // s x n
  Matrix Z0;  // n x r0, may have zero columns
  double T_f = 1.0;
  std::string name;

  Index n() const { return A.rows(); }
  Index inputs() const { return B.cols(); }
  Index outputs() const { return C.rows(); }
};

/// Reusable factorization of the coefficient operator. Supports block actions
/// of A, A^T, A^{-1}, A^{-T}. Copies share the factorization and counters;
/// all actions are const and thread-safe.
class LinearOperator {
 public:
  struct Counters {
    std::atomic<long> matvecs{0};
    std::atomic<long> solves{0};
  };

  /// Plain sparse coefficient. Throws SingularA.
  static LinearOperator factorize(const SparseMatrix& A);
  /// Descriptor coefficient E^{-1} N. Throws SingularA.
  static LinearOperator factorize(const SparseMatrix& N, const SparseMatrix& E);
  static LinearOperator factorize(const DREProblem& problem);

  Index rows() const { return n_; }

  Matrix apply(const Matrix& V) const;
  Matrix apply_t(const Matrix& V) const;
  Matrix solve(const Matrix& V) const;
  Matrix solve_t(const Matrix& V) const;

  /// A^T V and A^{-T} V in long double. The extended-precision factorization
  /// is built on first use.
  MatrixLd apply_t_ext(const MatrixLd& V) const;
  MatrixLd solve_t_ext(const MatrixLd& V) const;

  /// Factorized handle for  scale * A + shift * I.
  LinearOperator affine(double scale, double shift) const;

  /// Dense n x n coefficient (intended for small n).
  Matrix to_dense() const;

  long matvecs() const { return counters_->matvecs.load(); }
  long solves() const { return counters_->solves.load(); }
  void reset_counters() const {
    counters_->matvecs = 0;
    counters_->solves = 0;
  }

 private:
  struct Factors;
  LinearOperator() = default;

  Index n_ = 0;
  std::shared_ptr<const Factors> factors_;
  std::shared_ptr<Counters> counters_;
};

struct SolverConfig {
  int p = 2;                 // BDF order, 1..3
  double h = 1e-3;           // uniform time step
  double tol = 1e-10;        // residual stop tolerance
  int m_max = 40;            // max extended Arnoldi iterations
  double dtol = 1e-12;       // relative truncation tolerance for factors
  int check_stride = 1;      // residual test every check_stride iterations
  double care_tol = 1e-12;   // inner CARE relative residual tolerance
  int care_maxit = 50;

  /// Number of uniform steps covering [0, T_f]. Throws InvalidConfig.
  long steps_for(double T_f) const;
  void validate(double T_f) const;
};

/// Parses `key = value` lines ('#' starts a comment). Unknown keys and
/// malformed values raise ParseError.
SolverConfig parse_config(const std::string& text);
SolverConfig load_config(const std::string& path);
std::string to_config_text(const SolverConfig& config);

struct ValidationReport {
  bool valid = true;
  Index n = 0, inputs = 0, outputs = 0;
  Index rank_B = 0, rank_C = 0;
  bool B_rank_deficient = false;
  bool C_rank_deficient = false;
  std::vector<std::string> issues;
};

/// Shape checks (DimensionMismatch), factorizability of A (SingularA) and
/// rank checks on B and C, which are reported rather than thrown.
ValidationReport validate(const DREProblem& problem);

/// Numerical rank from a column-pivoted QR with relative threshold.
Index numerical_rank(const Matrix& M, double rel_tol = 1e-10);

}  // namespace dre
