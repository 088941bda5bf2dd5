#include <doctest.h>

#include <cmath>

#include "dre/benchmarks.hpp"
#include "dre/bdf.hpp"
#include "dre/dense_solvers.hpp"
#include "dre/errors.hpp"
#include "dre/lqr.hpp"
#include "dre/oracle.hpp"
#include "dre/rng.hpp"

using namespace dre;

TEST_CASE("optimal cost basics") {
  const Matrix Z = Rng(1).normal(6, 2);
  CHECK(optimal_cost(Z, Vector::Zero(6)).J == 0.0);
  const Matrix e1 = Matrix::Identity(6, 1);
  Vector x0 = Vector::Zero(6);
  x0(0) = 3.0;
  CHECK(optimal_cost(e1, x0).J == doctest::Approx(9.0));
  const Vector x = Rng(2).normal(6, 1);
  CHECK(optimal_cost(Z, x).J == doctest::Approx(x.dot(Z * Z.transpose() * x)).epsilon(1e-13));
  CHECK_THROWS_AS(optimal_cost(Z, Vector::Zero(5)), DimensionMismatch);
}

TEST_CASE("cost identity and dense comparison on a solved instance") {
  const DREProblem p = gen_convdiff2d(7, 2, 2, 1);
  SolverConfig c;
  const LowRankSolution s = solve(p, c);
  const Vector x0 = Rng(5).uniform(49, 1);
  const CostIdentity id = projected_cost_identity_check(s, x0);
  CHECK(id.discrepancy <= 1e-10 * std::abs(id.full));

  IntegrationOptions opt = integration_options(c);
  const ProjectedTrajectory ref = integrate_arole(Matrix(p.A), p.B, p.C.transpose() * p.C,
                                                  p.Z0 * p.Z0.transpose(), p.T_f, opt);
  const double Jd = x0.dot(ref.final() * x0);
  CHECK(optimal_cost(s, x0).J == doctest::Approx(Jd).epsilon(1e-8));
}

TEST_CASE("with B = 0 the closed loop is the open loop") {
  DREProblem p;
  p.A = convdiff2d_matrix(3);
  p.B = Matrix::Zero(9, 1);
  p.C = Rng(1).uniform(1, 9);
  p.Z0 = Matrix::Zero(9, 1);
  p.T_f = 0.2;
  const GainSchedule g = gain_schedule(p.B, {0.0, 0.2}, {Matrix::Zero(9, 9), Matrix::Zero(9, 9)}, p.T_f);
  const Vector x0 = Rng(2).uniform(9, 1);
  const ClosedLoopRun run = simulate_closed_loop(p, g, x0, 1e-3);
  Vector x = x0;
  const Matrix Ainv = (Matrix::Identity(9, 9) - 1e-3 * Matrix(p.A)).inverse();
  for (int k = 0; k < 200; ++k) x = Ainv * x;
  CHECK((run.x_final - x).norm() < 1e-12 * x.norm());
  CHECK(run.terminal_cost == 0.0);
}

TEST_CASE("gain schedule reverses time and interpolates") {
  const Matrix B = Matrix::Identity(2, 1);
  std::vector<Matrix> X{Matrix::Zero(2, 2), Matrix::Identity(2, 2)};
  const GainSchedule g = gain_schedule(B, {0.0, 1.0}, X, 1.0);
  // u(0) uses X(T_f) = I.
  CHECK(g.reduced_gain(0.0)(0, 0) == -1.0);
  CHECK(g.reduced_gain(1.0)(0, 0) == 0.0);
  CHECK(g.reduced_gain(0.25)(0, 0) == doctest::Approx(-0.75));
  CHECK(g.dense(0).cols() == 2);
}

TEST_CASE("realized cost converges at first order in h_sim") {
  const DREProblem p = scalar_riccati(0.5);
  const double T = 1.0;
  std::vector<double> tau;
  std::vector<Matrix> X;
  for (int i = 0; i <= 1000; ++i) {
    const double t = i * 1e-3;
    const double th = std::tanh(t);
    tau.push_back(t);
    X.push_back(Matrix::Constant(1, 1, (0.5 + th) / (1.0 + 0.5 * th)));
  }
  const GainSchedule g = gain_schedule(p.B, tau, X, T);
  const Vector x0 = Vector::Ones(1);
  const double J = X.back()(0, 0);
  const double e1 = std::abs(simulate_closed_loop(p, g, x0, 4e-3).realized_cost - J);
  const double e2 = std::abs(simulate_closed_loop(p, g, x0, 2e-3).realized_cost - J);
  const double e3 = std::abs(simulate_closed_loop(p, g, x0, 1e-3).realized_cost - J);
  CHECK(e1 / e2 > 1.7);
  CHECK(e1 / e2 < 2.3);
  CHECK(e2 / e3 > 1.7);
  CHECK(e2 / e3 < 2.3);
}

TEST_CASE("steady state") {
  SUBCASE("scalar") {
    const SteadyState s = steady_state(scalar_riccati(0.5));
    CHECK(s.X(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.dense_solution);
  }
  SUBCASE("projected variant on a larger instance") {
    const DREProblem p = gen_convdiff2d(16, 2, 2, 2);
    const SteadyState s = steady_state(p, 1e-10);
    CHECK_FALSE(s.dense_solution);
    CHECK(s.residual < 1e-10);
    const Matrix X = s.Z * s.Z.transpose();
    CHECK(care_residual(Matrix(p.A), p.B, p.C.transpose() * p.C, X) < 1e-10);
  }
}

TEST_CASE("difference norm through stacked factors") {
  Rng rng(3);
  const Matrix Z1 = rng.normal(20, 3), Z2 = rng.normal(20, 4);
  const Matrix D = Z1 * Z1.transpose() - Z2 * Z2.transpose();
  CHECK(difference_norm(Z1, Z2) == doctest::Approx(D.norm()).epsilon(1e-12));
  CHECK(difference_norm(Z1, Z1) < 1e-12 * factor_norm(Z1));
  CHECK(factor_norm(Z1) == doctest::Approx((Z1 * Z1.transpose()).norm()).epsilon(1e-12));
}
