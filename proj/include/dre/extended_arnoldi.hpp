#pragma once

#include <string>
#include <vector>

#include "dre/problem.hpp"
#include "dre/types.hpp"

namespace dre {

/// Operator M whose extended Krylov space K^e(M, W) = span{W, M^{-1}W, M W, M^{-2}W, ...}
/// is built. Only block actions of M and M^{-1} are needed.
class KrylovOperator {
 public:
  virtual ~KrylovOperator() = default;
  virtual Index rows() const = 0;
  virtual Matrix apply(const Matrix& V) const = 0;
  virtual Matrix solve(const Matrix& V) const = 0;
  /// Long double actions used to generate the basis. The defaults round
  /// through double.
  virtual MatrixLd apply_ext(const MatrixLd& V) const { return apply(V.cast<double>()).cast<long double>(); }
  virtual MatrixLd solve_ext(const MatrixLd& V) const { return solve(V.cast<double>()).cast<long double>(); }
};

/// M = A^T for a factorized coefficient A.
class TransposedOperator final : public KrylovOperator {
 public:
  explicit TransposedOperator(const LinearOperator& A) : A_(A) {}
  Index rows() const override { return A_.rows(); }
  Matrix apply(const Matrix& V) const override { return A_.apply_t(V); }
  Matrix solve(const Matrix& V) const override { return A_.solve_t(V); }
  MatrixLd apply_ext(const MatrixLd& V) const override { return A_.apply_t_ext(V); }
  MatrixLd solve_ext(const MatrixLd& V) const override { return A_.solve_t_ext(V); }

 private:
  const LinearOperator& A_;
};

/// Orthonormal basis of the extended block Krylov space with the projected
/// operator T = V^T M V accumulated block by block.
///
/// The recurrence runs in long double. In double the defect of the Arnoldi
/// relation grows geometrically with m, because M-images of the inverse chain
/// inherit the defects of all earlier blocks; the accessors return the
/// rounded double copies.
///
/// Block j holds 2s columns: V_j^(1) (continued with M) and V_j^(2)
/// (continued with M^{-1}). After m successful expansions the basis has m+1
/// blocks, T_m (first m blocks) is complete and T_sub = V_{m+1}^T M V_m is the
/// coupling to the next block. Blocks of T below the first subdiagonal are
/// never computed and stay exactly zero.
class ExtendedKrylovBasis {
 public:
  /// QR of [W, M^{-1} W]. Throws RankDeficientSeed.
  static ExtendedKrylovBasis seed(const KrylovOperator& op, const Matrix& W);

  /// Appends one block (block Gram-Schmidt plus one reorthogonalization).
  /// Throws Breakdown when the new block is numerically rank deficient; the
  /// basis then stays valid, flags breakdown() and spans an M-invariant
  /// subspace.
  void expand(const KrylovOperator& op);

  Index n() const { return V_.rows(); }
  Index block_size() const { return 2 * s_; }
  Index half_block() const { return s_; }
  Index num_blocks() const { return nblocks_; }
  /// Successful expansions.
  Index m() const { return nblocks_ - 1; }
  bool breakdown() const { return breakdown_; }
  /// Number of leading blocks whose projection T is complete.
  Index usable_blocks() const { return breakdown_ ? nblocks_ : nblocks_ - 1; }

  /// First `blocks` blocks as an n x 2s*blocks matrix.
  auto basis(Index blocks) const { return V_.leftCols(2 * s_ * blocks); }
  auto block(Index j) const { return V_.middleCols(2 * s_ * j, 2 * s_); }  // 0-based
  const Matrix& all_vectors() const { return V_; }

  /// T_m for the first `blocks` blocks (2s*blocks square).
  Matrix T(Index blocks) const;
  /// V_{blocks+1}^T M V_{blocks}; empty (0x0) at breakdown.
  Matrix T_sub(Index blocks) const;
  /// Stored M V for the first `blocks` blocks.
  auto applied(Index blocks) const { return MV_.leftCols(2 * s_ * blocks); }

  const Matrix& Lambda() const { return Lambda_; }
  Matrix Lambda11() const { return Lambda_.topLeftCorner(s_, s_); }
  /// Raw Gram-Schmidt coefficients of expansion j (rows: all previous
  /// blocks then H_{j+1,j}).
  const std::vector<Matrix>& H() const { return H_; }

 private:
  ExtendedKrylovBasis() = default;

  Index s_ = 0;
  Index nblocks_ = 0;
  bool breakdown_ = false;
  MatrixLd VL_;    // working basis
  MatrixLd MVL_;
  MatrixLd TL_;
  Matrix V_;       // n x 2s*nblocks
  Matrix MV_;      // n x 2s*(blocks with computed products)
  Matrix Tfull_;   // (2s*nblocks) x (2s*nblocks)
  Matrix Lambda_;  // 2s x 2s
  std::vector<Matrix> H_;
};

/// Convenience: basis of K^e(A^T, C^T).
ExtendedKrylovBasis seed_transposed(const LinearOperator& A, const Matrix& C);

struct ProjectedMatrices {
  Matrix T;   // 2ms x 2ms
  Matrix Bm;  // 2ms x l
  Matrix Cm;  // s x 2ms, assembled as [Lambda11^T, 0]
};

/// Projection onto the first `blocks` blocks of a basis seeded with C^T.
ProjectedMatrices projected_matrices(const ExtendedKrylovBasis& basis, const Matrix& B, Index blocks);

struct ArnoldiDiagnostics {
  Index blocks = 0;
  double orthogonality = 0.0;      // ||V^T V - I||_F
  double relation_residual = 0.0;  // ||M V - V T - V_{+} T_sub E^T||_F / ||M V||_F
};

ArnoldiDiagnostics diagnose(const ExtendedKrylovBasis& basis, Index blocks);

/// One CSV row per entry: blocks,orthogonality,relation_residual.
void write_arnoldi_diagnostics(const std::string& path, const std::vector<ArnoldiDiagnostics>& rows);

}  // namespace dre
