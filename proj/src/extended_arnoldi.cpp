#include "dre/extended_arnoldi.hpp"

#include <fstream>
#include <iomanip>

#include "dre/errors.hpp"

namespace dre {

namespace {

constexpr long double kRankTol = 1e-12L;

struct ThinQr {
  MatrixLd Q;
  MatrixLd R;
};

ThinQr thin_qr(const MatrixLd& W) {
  Eigen::HouseholderQR<MatrixLd> qr(W);
  const Index k = W.cols();
  ThinQr out;
  out.Q = qr.householderQ() * MatrixLd::Identity(W.rows(), k);
  out.R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  // Positive diagonal keeps the factorization unique.
  for (Index i = 0; i < k; ++i) {
    if (out.R(i, i) < 0) {
      out.R.row(i) *= -1.0L;
      out.Q.col(i) *= -1.0L;
    }
  }
  return out;
}

long double min_abs_diagonal(const MatrixLd& R) { return R.diagonal().cwiseAbs().minCoeff(); }

}  // namespace

ExtendedKrylovBasis ExtendedKrylovBasis::seed(const KrylovOperator& op, const Matrix& W) {
  const Index n = op.rows();
  const Index s = W.cols();
  if (W.rows() != n) throw DimensionMismatch("seed: start block has wrong row count");
  if (s < 1) throw DimensionMismatch("seed: start block is empty");
  if (2 * s > n) throw RankDeficientSeed("seed: 2s exceeds n");

  const MatrixLd WL = W.cast<long double>();
  MatrixLd start(n, 2 * s);
  start.leftCols(s) = WL;
  start.rightCols(s) = op.solve_ext(WL);
  const ThinQr qr = thin_qr(start);
  const long double scale = start.norm();
  if (!(min_abs_diagonal(qr.R) > kRankTol * scale))
    throw RankDeficientSeed("seed: [W, M^{-1} W] is numerically rank deficient");

  ExtendedKrylovBasis b;
  b.s_ = s;
  b.nblocks_ = 1;
  b.VL_ = qr.Q;
  b.MVL_.resize(n, 0);
  b.TL_ = MatrixLd::Zero(2 * s, 2 * s);
  b.V_ = qr.Q.cast<double>();
  b.MV_.resize(n, 0);
  b.Tfull_ = Matrix::Zero(2 * s, 2 * s);
  b.Lambda_ = qr.R.cast<double>();
  return b;
}

void ExtendedKrylovBasis::expand(const KrylovOperator& op) {
  if (breakdown_) throw Breakdown("expand: basis already broke down");
  const Index n = VL_.rows();
  const Index bs = 2 * s_;
  const Index j = nblocks_ - 1;  // 0-based index of the last block
  const Index k = bs * nblocks_;

  const MatrixLd Vj = VL_.middleCols(bs * j, bs);
  const MatrixLd P = op.apply_ext(Vj);  // M V_j, both halves (second half only feeds T)
  MatrixLd W(n, bs);
  W.leftCols(s_) = P.leftCols(s_);
  W.rightCols(s_) = op.solve_ext(Vj.rightCols(s_));

  MVL_.conservativeResize(n, k);
  MVL_.middleCols(bs * j, bs) = P;

  // T column block j against the existing blocks.
  TL_.block(0, bs * j, k, bs).noalias() = VL_.transpose() * P;

  const long double scale = W.norm();
  MatrixLd coef = VL_.transpose() * W;
  W.noalias() -= VL_ * coef;
  MatrixLd coef2 = VL_.transpose() * W;
  W.noalias() -= VL_ * coef2;
  coef += coef2;

  const ThinQr qr = thin_qr(W);
  if (!(min_abs_diagonal(qr.R) > kRankTol * scale)) {
    breakdown_ = true;
    Tfull_ = TL_.cast<double>();
    MV_ = MVL_.cast<double>();
    throw Breakdown("expand: orthogonalized block is rank deficient at block " +
                    std::to_string(nblocks_ + 1) + " (invariant subspace reached)");
  }

  Matrix Hj(k + bs, bs);
  Hj.topRows(k) = coef.cast<double>();
  Hj.bottomRows(bs) = qr.R.cast<double>();
  H_.push_back(std::move(Hj));

  VL_.conservativeResize(n, k + bs);
  VL_.rightCols(bs) = qr.Q;
  ++nblocks_;

  TL_.conservativeResize(k + bs, k + bs);
  TL_.bottomRows(bs).setZero();
  TL_.rightCols(bs).setZero();
  TL_.block(k, bs * j, bs, bs).noalias() = qr.Q.transpose() * P;

  V_.conservativeResize(n, k + bs);
  V_.rightCols(bs) = qr.Q.cast<double>();
  MV_.conservativeResize(n, k);
  MV_.middleCols(bs * j, bs) = P.cast<double>();
  Tfull_ = TL_.cast<double>();
}

Matrix ExtendedKrylovBasis::T(Index blocks) const {
  if (blocks < 1 || blocks > usable_blocks())
    throw DimensionMismatch("T: requested " + std::to_string(blocks) + " blocks, " +
                            std::to_string(usable_blocks()) + " available");
  const Index k = 2 * s_ * blocks;
  return Tfull_.topLeftCorner(k, k);
}

Matrix ExtendedKrylovBasis::T_sub(Index blocks) const {
  if (blocks < 1 || blocks > usable_blocks())
    throw DimensionMismatch("T_sub: requested block count not available");
  if (blocks == nblocks_) return Matrix(0, 0);  // breakdown: no next block
  const Index bs = 2 * s_;
  return Tfull_.block(bs * blocks, bs * (blocks - 1), bs, bs);
}

ExtendedKrylovBasis seed_transposed(const LinearOperator& A, const Matrix& C) {
  TransposedOperator op(A);
  return ExtendedKrylovBasis::seed(op, C.transpose());
}

ProjectedMatrices projected_matrices(const ExtendedKrylovBasis& basis, const Matrix& B, Index blocks) {
  if (B.rows() != basis.n()) throw DimensionMismatch("projected_matrices: B has wrong row count");
  ProjectedMatrices pm;
  pm.T = basis.T(blocks);
  pm.Bm = basis.basis(blocks).transpose() * B;
  const Index s = basis.half_block();
  pm.Cm = Matrix::Zero(s, 2 * s * blocks);
  pm.Cm.leftCols(s) = basis.Lambda11().transpose();
  return pm;
}

ArnoldiDiagnostics diagnose(const ExtendedKrylovBasis& basis, Index blocks) {
  ArnoldiDiagnostics d;
  d.blocks = blocks;
  const Index k = 2 * basis.half_block() * blocks;
  const Matrix V = basis.basis(blocks);
  d.orthogonality = (V.transpose() * V - Matrix::Identity(k, k)).norm();

  const Matrix MV = basis.applied(blocks);
  Matrix R = MV - V * basis.T(blocks);
  const Matrix Ts = basis.T_sub(blocks);
  if (Ts.size() > 0) R.rightCols(Ts.cols()) -= basis.block(blocks) * Ts;
  const double den = MV.norm();
  d.relation_residual = den > 0 ? R.norm() / den : R.norm();
  return d;
}

void write_arnoldi_diagnostics(const std::string& path, const std::vector<ArnoldiDiagnostics>& rows) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << "blocks,orthogonality,relation_residual\n" << std::setprecision(10);
  for (const auto& r : rows) out << r.blocks << ',' << r.orthogonality << ',' << r.relation_residual << '\n';
}

}  // namespace dre
