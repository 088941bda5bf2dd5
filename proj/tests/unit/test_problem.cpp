#include <doctest.h>

#include "dre/benchmarks.hpp"
#include "dre/errors.hpp"
#include "dre/problem.hpp"
#include "dre/rng.hpp"

using namespace dre;

namespace {

SparseMatrix diag_sparse(const Vector& d) {
  SparseMatrix A(d.size(), d.size());
  for (Index i = 0; i < d.size(); ++i) A.insert(i, i) = d(i);
  A.makeCompressed();
  return A;
}

}  // namespace

TEST_CASE("validate accepts a conforming instance") {
  const DREProblem p = gen_convdiff2d(7, 2, 2, 3);
  const ValidationReport r = validate(p);
  CHECK(r.valid);
  CHECK(r.n == 49);
  CHECK(r.rank_B == 2);
  CHECK(r.rank_C == 2);
  CHECK_FALSE(r.B_rank_deficient);
}

TEST_CASE("validate flags a duplicated column of B") {
  DREProblem p = gen_convdiff2d(7, 2, 2, 3);
  p.B.col(1) = p.B.col(0);
  const ValidationReport r = validate(p);
  CHECK(r.B_rank_deficient);
  CHECK(r.rank_B == 1);
  CHECK_FALSE(r.valid);
}

TEST_CASE("validate rejects a zero coefficient and bad shapes") {
  DREProblem p = gen_convdiff2d(3, 1, 1, 3);
  DREProblem zero = p;
  zero.A = SparseMatrix(9, 9);
  CHECK_THROWS_AS(validate(zero), SingularA);
  DREProblem bad = p;
  bad.B = Matrix::Ones(8, 1);
  CHECK_THROWS_AS(validate(bad), DimensionMismatch);
}

TEST_CASE("factorize: identity and diagonal solves") {
  const LinearOperator I = LinearOperator::factorize(diag_sparse(Vector::Ones(6)));
  const Matrix V = Rng(5).uniform(6, 3);
  CHECK((I.solve(V) - V).norm() == doctest::Approx(0.0));

  Vector d(5);
  d << 1, 2, 3, 4, 5;
  const LinearOperator D = LinearOperator::factorize(diag_sparse(d));
  const Matrix x = D.solve(Matrix::Identity(5, 5).col(2));
  CHECK(x(2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(x.norm() == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("factorize: roundtrip and transpose on generated matrices") {
  for (const DREProblem& p : {gen_convdiff2d(3, 2, 2, 1), gen_convdiff2d(12, 2, 2, 1),
                              gen_heat1d_fem(60, 2, 0.05, 0.01, 1)}) {
    const LinearOperator op = LinearOperator::factorize(p);
    Rng rng(11);
    const Matrix V = rng.uniform(p.n(), 3);
    const Matrix W = rng.uniform(p.n(), 3);
    CHECK((op.apply(op.solve(V)) - V).norm() / V.norm() <= 1e-12);
    CHECK((op.apply_t(op.solve_t(V)) - V).norm() / V.norm() <= 1e-12);
    CHECK((op.solve(op.apply(V)) - V).norm() / V.norm() <= 1e-12);
    const double lhs = frobenius_dot(op.apply(V), W);
    const double rhs = frobenius_dot(V, op.apply_t(W));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(lhs));
    const double ls = frobenius_dot(op.solve(V), W);
    const double rs = frobenius_dot(V, op.solve_t(W));
    CHECK(std::abs(ls - rs) <= 1e-12 * std::abs(ls));
  }
}

TEST_CASE("descriptor operator matches the dense coefficient") {
  const DREProblem p = gen_heat1d_fem(12, 2, 0.05, 0.01, 2);
  const LinearOperator op = LinearOperator::factorize(p);
  const Matrix E = Matrix(*p.E);
  const Matrix A = E.fullPivLu().solve(Matrix(p.A));
  CHECK((op.to_dense() - A).norm() <= 1e-12 * A.norm());

  const LinearOperator shifted = op.affine(0.3, -0.5);
  const Matrix S = 0.3 * A - 0.5 * Matrix::Identity(12, 12);
  const Matrix V = Rng(2).uniform(12, 2);
  CHECK((shifted.apply(V) - S * V).norm() <= 1e-12 * (S * V).norm());
  CHECK((shifted.solve_t(V) - S.transpose().fullPivLu().solve(V)).norm() <= 1e-10 * V.norm());
}

TEST_CASE("operation counters count columns") {
  const LinearOperator op = LinearOperator::factorize(convdiff2d_matrix(4));
  op.reset_counters();
  op.apply(Matrix::Ones(16, 3));
  op.solve_t(Matrix::Ones(16, 2));
  CHECK(op.matvecs() == 3);
  CHECK(op.solves() == 2);
}

TEST_CASE("solver configuration") {
  SolverConfig c;
  CHECK(c.steps_for(1.0) == 1000);
  CHECK(c.steps_for(0.0) == 0);
  c.h = 0.3;
  CHECK_THROWS_AS(c.steps_for(1.0), InvalidConfig);
  c.h = -1.0;
  CHECK_THROWS_AS(c.validate(1.0), InvalidConfig);

  const SolverConfig parsed = parse_config("# comment\np = 3\nh=0.01\ntol = 1e-8 # trailing\ncheck_stride=3\n");
  CHECK(parsed.p == 3);
  CHECK(parsed.h == 0.01);
  CHECK(parsed.tol == 1e-8);
  CHECK(parsed.check_stride == 3);
  CHECK_THROWS_AS(parse_config("bogus = 1"), ParseError);
  CHECK_THROWS_AS(parse_config("h = abc"), ParseError);

  const SolverConfig back = parse_config(to_config_text(parsed));
  CHECK(back.p == parsed.p);
  CHECK(back.h == parsed.h);
  CHECK(back.care_maxit == parsed.care_maxit);
}
