#include <doctest.h>

#include "dre/baseline.hpp"
#include "dre/benchmarks.hpp"
#include "dre/dense_solvers.hpp"
#include "dre/errors.hpp"
#include "dre/rng.hpp"

using namespace dre;

namespace {

double rel(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

SparseMatrix sparse(const Matrix& M) { return M.sparseView(); }

}  // namespace

TEST_CASE("eba_lyapunov on F = -I with G = e1") {
  const LinearOperator op = LinearOperator::factorize(sparse(-Matrix::Identity(3, 3)));
  const TransposedOperator M(op);
  const Matrix G = Matrix::Identity(3, 1);
  const LyapunovFactorResult r = eba_lyapunov(M, G);
  Matrix expect = Matrix::Zero(3, 3);
  expect(0, 0) = 0.5;
  CHECK((r.Z * r.Z.transpose() - expect).norm() < 1e-14);
  CHECK(r.residual <= 1e-14);
}

TEST_CASE("eba_lyapunov with G = 0 returns the zero factor") {
  const LinearOperator op = LinearOperator::factorize(convdiff2d_matrix(3));
  const LyapunovFactorResult r = eba_lyapunov(TransposedOperator(op), Matrix::Zero(9, 2));
  CHECK(r.Z.cols() == 0);
  CHECK(r.residual == 0.0);
}

TEST_CASE("eba_lyapunov matches the dense Lyapunov solver") {
  const DREProblem p = gen_convdiff2d(7, 2, 2, 3);
  const LinearOperator op = LinearOperator::factorize(p);
  const Matrix G = p.C.transpose();
  const LyapunovFactorResult r = eba_lyapunov(TransposedOperator(op), G);
  const Matrix Xd = solve_lyapunov(Matrix(p.A), G * G.transpose());
  CHECK(rel(r.Z * r.Z.transpose(), Xd) < 1e-8);
  CHECK(r.residual <= 1e-12);
  CHECK(lyapunov_residual(Matrix(p.A), G * G.transpose(), r.Z * r.Z.transpose()) < 1e-10);
}

TEST_CASE("eba_lyapunov rejects an unstable operator") {
  const LinearOperator op = LinearOperator::factorize(sparse(Matrix::Identity(4, 4)));
  CHECK_THROWS_AS(eba_lyapunov(TransposedOperator(op), Matrix::Identity(4, 1)), UnstableClosedLoop);
}

TEST_CASE("signed factor compression preserves the matrix") {
  Rng rng(7);
  const Matrix Z0 = rng.normal(30, 4);
  SignedLowRankFactor X;
  X.Z.resize(30, 8);
  X.Z << Z0, Z0 * rng.normal(4, 4);  // rank 4
  X.signature.resize(8);
  X.signature << 1, 1, -1, 1, -1, 1, 1, -1;
  const SignedLowRankFactor c = X.compressed(1e-12);
  CHECK(c.rank() <= 4);
  CHECK(rel(c.dense(), X.dense()) < 1e-12);
  const SignedLowRankFactor z = SignedLowRankFactor::zero(30).compressed(1e-12);
  CHECK(z.rank() == 0);
  CHECK(z.dense().norm() == 0.0);
}

TEST_CASE("combine forms a X + b Y") {
  Rng rng(8);
  const SignedLowRankFactor X = SignedLowRankFactor::positive(rng.normal(10, 2));
  const SignedLowRankFactor Y = SignedLowRankFactor::positive(rng.normal(10, 3));
  const SignedLowRankFactor S = combine(2.0, X, -0.5, Y);
  CHECK(rel(S.dense(), 2.0 * X.dense() - 0.5 * Y.dense()) < 1e-14);
}

TEST_CASE("stacked constant term splits by weight sign") {
  Rng rng(9);
  const Matrix C = rng.uniform(2, 12);
  const SignedLowRankFactor X1 = SignedLowRankFactor::positive(rng.normal(12, 2));
  const SignedLowRankFactor X2 = SignedLowRankFactor::positive(rng.normal(12, 3));
  const double h = 1e-2;

  const BDFCoefficients c1 = bdf_coefficients(1);
  const StackedConstantFactor f1 = StackedConstantFactor::build(C, h * c1.beta, {&X1}, c1);
  CHECK(f1.negative.cols() == 0);
  CHECK(rel(f1.dense(), h * c1.beta * C.transpose() * C + X1.dense()) < 1e-14);

  const BDFCoefficients c2 = bdf_coefficients(2);
  const StackedConstantFactor f2 = StackedConstantFactor::build(C, h * c2.beta, {&X1, &X2}, c2);
  CHECK(f2.negative.cols() == 3);
  const Matrix expect = h * c2.beta * C.transpose() * C + c2.alpha[0] * X1.dense() + c2.alpha[1] * X2.dense();
  CHECK(rel(f2.dense(), expect) < 1e-14);
  CHECK_THROWS_AS(StackedConstantFactor::build(C, h, {&X1}, c2), DimensionMismatch);
}

TEST_CASE("large Newton step and residual match their dense counterparts") {
  const DREProblem p = gen_convdiff2d(7, 2, 2, 4);
  const LinearOperator op = LinearOperator::factorize(p);
  const double h = 1e-2;
  const BDFCoefficients c = bdf_coefficients(2);
  const LinearOperator shifted = op.affine(h * c.beta, -0.5);
  Rng rng(10);
  const SignedLowRankFactor X1 = SignedLowRankFactor::positive(0.3 * rng.uniform(49, 2));
  const SignedLowRankFactor X2 = SignedLowRankFactor::positive(0.3 * rng.uniform(49, 2));
  const LargeCareStep step = make_large_care_step(shifted, p.B, p.C, {&X1, &X2}, h, c);

  const Matrix Ad = shifted.to_dense();
  const Matrix Q = step.constant.dense();
  const SignedLowRankFactor Xp = X1;
  NewtonStepInfo info;
  const SignedLowRankFactor Xn = newton_step_large(step, Xp, {}, &info);
  const Matrix Xd = newton_kleinman_step(Ad, step.curlyB, Q, Xp.dense());
  CHECK(rel(Xn.dense(), Xd) < 1e-8);
  CHECK(info.L2.basis_size > 0);

  CHECK(large_care_residual(step, Xn) == doctest::Approx(care_residual(Ad, step.curlyB, Q, Xn.dense())).epsilon(1e-6));
  CHECK(large_care_residual(step, Xp) == doctest::Approx(care_residual(Ad, step.curlyB, Q, Xp.dense())).epsilon(1e-8));
}

TEST_CASE("Newton fixed point is the stabilizing step solution") {
  const DREProblem p = gen_convdiff2d(5, 2, 2, 5);
  const LinearOperator op = LinearOperator::factorize(p);
  const double h = 1e-2;
  const BDFCoefficients c = bdf_coefficients(1);
  const LinearOperator shifted = op.affine(h * c.beta, -0.5);
  const SignedLowRankFactor X1 = SignedLowRankFactor::positive(0.2 * Rng(11).uniform(25, 2));
  const LargeCareStep step = make_large_care_step(shifted, p.B, p.C, {&X1}, h, c);
  const Matrix Ad = shifted.to_dense();
  const Matrix Xs = solve_care(Ad, step.curlyB, step.constant.dense()).X;
  const TruncatedFactor tf = truncate_svd(Xs, 1e-14);
  const SignedLowRankFactor Xf = SignedLowRankFactor::positive(tf.U * tf.sigma.cwiseSqrt().asDiagonal());
  const SignedLowRankFactor Xn = newton_step_large(step, Xf, {});
  CHECK(rel(Xn.dense(), Xs) < 1e-9);
  CHECK(large_care_residual(step, Xn) < 1e-10);
}

TEST_CASE("baseline on the zero problem stays at zero") {
  DREProblem p;
  p.A = convdiff2d_matrix(3);
  p.B = Rng(1).uniform(9, 2);
  p.C = Matrix::Zero(2, 9);
  p.Z0 = Matrix::Zero(9, 1);
  p.T_f = 0.01;
  SolverConfig c;
  const BaselineSolution s = solve_baseline(p, c);
  CHECK(s.X_final.dense().norm() == 0.0);
  CHECK(s.log.size() == 10);
}

TEST_CASE("baseline agrees with dense BDF integration") {
  DREProblem p = gen_convdiff2d(7, 2, 2, 1);
  p.T_f = 0.1;
  SolverConfig c;
  c.h = 1e-3;
  const BaselineSolution b = solve_baseline(p, c);
  const ProjectedTrajectory ref = integrate_arole(Matrix(p.A), p.B, p.C.transpose() * p.C,
                                                  p.Z0 * p.Z0.transpose(), p.T_f, integration_options(c));
  CHECK(rel(b.X_final.dense(), ref.final()) < 1e-8);
  CHECK(b.reduced_steps == 0);
  for (const BaselineStepLog& row : b.log) CHECK(row.care_residual <= 1e-11);
  CHECK(b.log.front().order == 1);
  CHECK(b.log.back().order == 2);
}

TEST_CASE("baseline rejects inconsistent shapes") {
  DREProblem p = gen_convdiff2d(3, 2, 2, 1);
  p.B = Matrix::Zero(5, 2);
  CHECK_THROWS_AS(solve_baseline(p, SolverConfig{}), DimensionMismatch);
}
