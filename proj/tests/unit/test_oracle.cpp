#include <doctest.h>

#include <cmath>

#include "dre/dense_solvers.hpp"
#include "dre/errors.hpp"
#include "dre/oracle.hpp"

using namespace dre;

namespace {

// x' = 1 - x^2, x(0) = x0.
double scalar_exact(double x0, double t) {
  const double th = std::tanh(t);
  return (x0 + th) / (1.0 + x0 * th);
}

}  // namespace

TEST_CASE("sign convention resolution selects exactly one reading") {
  const ConventionResolution r = resolve_sign_conventions();
  int matches = 0;
  for (const ConventionCheck& c : r.checks) matches += c.matches;
  CHECK(matches == 1);
  CHECK(r.checks.size() == 4);
  CHECK(r.selected == resolve_sign_convention());
  CHECK(resolve_sign_convention() == resolve_sign_convention());
}

TEST_CASE("exact solution at t = 0 is X0") {
  const DREProblem p = oracle_instance(6, 3);
  const Matrix X0 = p.Z0 * p.Z0.transpose();
  CHECK((exact_solution(p, 0.0) - X0).norm() / X0.norm() < 1e-12);
}

TEST_CASE("scalar closed form") {
  for (double x0 : {0.5, 0.9, 2.0}) {
    const DREProblem p = scalar_riccati(x0);
    for (double t : {0.1, 0.5, 1.0, 3.0}) CHECK(exact_solution(p, t)(0, 0) == doctest::Approx(scalar_exact(x0, t)).epsilon(1e-12));
  }
}

TEST_CASE("exact solution tends to the stabilizing ARE solution") {
  const DREProblem p = oracle_instance(5, 4);
  const OracleData d = prepare_oracle(p, resolve_sign_convention());
  CHECK((exact_solution(d, 40.0) - d.Xtilde).norm() / d.Xtilde.norm() < 1e-8);
  CHECK(spectral_abscissa(d.Atilde) < 0.0);
}

TEST_CASE("dense reference on the scalar problem") {
  const DREProblem p = scalar_riccati(0.9);
  const std::vector<Matrix> X = dense_reference_integrate(p, 1e-4, {0.5, 1.0});
  CHECK(std::abs(X[1](0, 0) - scalar_exact(0.9, 1.0)) <= 1e-7);
  CHECK(std::abs(X[0](0, 0) - scalar_exact(0.9, 0.5)) <= 1e-7);
}

TEST_CASE("oracle agrees with the dense reference") {
  for (std::uint64_t seed : {21u, 22u}) {
    const DREProblem p = oracle_instance(8, seed);
    const std::vector<double> times{0.1, 0.5};
    const std::vector<Matrix> ref = dense_reference_integrate(p, 1e-4, times);
    for (std::size_t i = 0; i < times.size(); ++i) {
      ExactSolutionInfo info;
      const Matrix X = exact_solution(p, times[i], &info);
      CHECK((X - ref[i]).norm() / ref[i].norm() <= 1e-6);
      CHECK_FALSE(info.ill_conditioned);
    }
  }
}

TEST_CASE("oracle preconditions") {
  DREProblem p = oracle_instance(4, 1);
  p.Z0 = Matrix::Zero(4, 1);
  CHECK_THROWS_AS(prepare_oracle(p, SignConvention::minus_plain), InvalidConfig);

  DREProblem q = oracle_instance(4, 1);
  q.C = Matrix::Zero(2, 4);
  q.A = SparseMatrix(Matrix::Identity(4, 4).sparseView());
  q.B = Matrix::Zero(4, 2);
  CHECK_THROWS_AS(prepare_oracle(q, SignConvention::minus_plain), NotObservable);

  const DREProblem big = oracle_instance(201, 1);
  CHECK_THROWS_AS(prepare_oracle(big, SignConvention::minus_plain), InvalidConfig);
}

TEST_CASE("oracle instances are deterministic") {
  const DREProblem a = oracle_instance(5, 9), b = oracle_instance(5, 9), c = oracle_instance(5, 10);
  CHECK(Matrix(a.A) == Matrix(b.A));
  CHECK(a.Z0 == b.Z0);
  CHECK(Matrix(a.A) != Matrix(c.A));
}
