#include <doctest.h>

#include <cmath>

#include "dre/bdf.hpp"
#include "dre/errors.hpp"
#include "dre/rng.hpp"

using namespace dre;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

// dy/dt = 1 - y^2, y(0) = 0, solution tanh(t)
double tanh_error(int p, double h) {
  IntegrationOptions o;
  o.p = p;
  o.h = h;
  const ProjectedTrajectory tr = integrate(scalar(0), scalar(1), scalar(1), scalar(0), 1.0, o);
  return std::abs(tr.final()(0, 0) - std::tanh(1.0));
}

}  // namespace

TEST_CASE("coefficients") {
  BDFCoefficients c = bdf_coefficients(1);
  CHECK(c.beta == 1.0);
  CHECK(c.alpha[0] == 1.0);
  c = bdf_coefficients(2);
  CHECK(c.beta == 2.0 / 3.0);
  CHECK(c.alpha[0] == 4.0 / 3.0);
  CHECK(c.alpha[1] == -1.0 / 3.0);
  c = bdf_coefficients(3);
  CHECK(c.beta == 6.0 / 11.0);
  CHECK(c.alpha[0] == 18.0 / 11.0);
  CHECK(c.alpha[1] == -9.0 / 11.0);
  CHECK(c.alpha[2] == 2.0 / 11.0);
  for (int p = 1; p <= 3; ++p) {
    c = bdf_coefficients(p);
    CHECK(c.alpha[0] + c.alpha[1] + c.alpha[2] == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(bdf_coefficients(0), UnsupportedOrder);
  CHECK_THROWS_AS(bdf_coefficients(4), UnsupportedOrder);
}

TEST_CASE("step assembly") {
  const Matrix I = Matrix::Identity(3, 3);
  std::vector<Matrix> hist{I};
  CareStepData d = assemble_care_step(Matrix::Zero(3, 3), Matrix::Ones(3, 1), Matrix::Zero(1, 3), hist, 1.0,
                                      bdf_coefficients(1));
  CHECK((d.curlyA + 0.5 * I).norm() == 0.0);
  CHECK((d.Qstep - I).norm() == 0.0);

  Rng rng(3);
  const Matrix T = rng.normal(4, 4);
  const Matrix Bm = rng.normal(4, 2);
  const Matrix Cm = rng.normal(2, 4);
  const Matrix G1 = rng.normal(4, 4), G2 = rng.normal(4, 4);
  const Matrix Y1 = G1 * G1.transpose(), Y0 = G2 * G2.transpose();
  const double h = 1e-3;
  std::vector<Matrix> hist2{Y1, Y0};
  d = assemble_care_step(T, Bm, Cm, hist2, h, bdf_coefficients(2));
  const Matrix expected = (2 * h / 3) * Cm.transpose() * Cm + (4.0 / 3.0) * Y1 - (1.0 / 3.0) * Y0;
  CHECK((d.Qstep - expected).norm() <= 1e-14 * expected.norm());
  CHECK((d.Qstep - d.Qstep.transpose()).norm() == 0.0);
  CHECK((d.curlyA - ((2 * h / 3) * T.transpose() - 0.5 * Matrix::Identity(4, 4))).norm() <= 1e-15);
  CHECK((d.curlyB - std::sqrt(2 * h / 3) * Bm).norm() <= 1e-15);

  CHECK_THROWS_AS(assemble_care_step(T, Bm, Cm, hist, h, bdf_coefficients(2)), DimensionMismatch);
}

TEST_CASE("scalar analytic problem") {
  CHECK(tanh_error(1, 1e-3) <= 2e-3);
  CHECK(tanh_error(2, 1e-3) <= 1e-5);

  for (int p = 1; p <= 2; ++p) {
    const double e4 = tanh_error(p, 4e-3), e2 = tanh_error(p, 2e-3), e1 = tanh_error(p, 1e-3);
    const double o1 = std::log2(e4 / e2), o2 = std::log2(e2 / e1);
    CAPTURE(p);
    CHECK(std::abs(o1 - p) <= 0.2);
    CHECK(std::abs(o2 - p) <= 0.2);
  }
  CHECK(tanh_error(3, 1e-3) <= 1e-6);
}

TEST_CASE("trivial trajectories") {
  IntegrationOptions o;
  const Matrix Y0 = Matrix::Identity(2, 2);
  ProjectedTrajectory tr = integrate(-Matrix::Identity(2, 2), Matrix::Ones(2, 1), Matrix::Ones(1, 2), Y0, 0.0, o);
  CHECK(tr.samples.size() == 1);
  CHECK((tr.final() - Y0).norm() == 0.0);

  Matrix T = Rng(5).normal(3, 3);
  tr = integrate(T, Matrix::Zero(3, 1), Matrix::Zero(1, 3), Matrix::Zero(3, 3), 0.1, o);
  CHECK(tr.final().norm() == 0.0);
}

TEST_CASE("equilibrium is a fixed point of every order") {
  Matrix T = Rng(7).normal(4, 4);
  T -= (spectral_abscissa(T) + 1.0) * Matrix::Identity(4, 4);
  const Matrix Bm = Rng(8).normal(4, 2);
  const Matrix Cm = Rng(9).normal(2, 4);
  const Matrix Ystar = solve_care(T.transpose(), Bm, Cm.transpose() * Cm).X;
  for (int p = 1; p <= 3; ++p) {
    std::vector<Matrix> hist(p, Ystar);
    const CareStepData d = assemble_care_step(T, Bm, Cm, hist, 1e-2, bdf_coefficients(p));
    const StepResult r = bdf_step(d, Ystar, CareOptions{});
    CHECK((r.Y - Ystar).norm() <= 1e-11 * Ystar.norm());
  }
}

TEST_CASE("symmetry, sampling and positivity") {
  Matrix T = Rng(11).normal(5, 5);
  const Matrix Bm = Rng(12).normal(5, 2);
  const Matrix Cm = Rng(13).normal(2, 5);
  const Matrix G = Rng(14).normal(5, 2);
  IntegrationOptions o;
  o.h = 1e-2;
  o.sample_stride = 10;
  o.keep_log = true;
  for (int p = 1; p <= 3; ++p) {
    o.p = p;
    const ProjectedTrajectory tr = integrate(T, Bm, Cm, G * G.transpose(), 1.0, o);
    CHECK(tr.samples.size() == 11);
    CHECK(tr.log.size() == 100);
    CHECK(tr.times.back() == 1.0);
    for (std::size_t i = 0; i < tr.samples.size(); ++i) {
      CHECK((tr.samples[i] - tr.samples[i].transpose()).norm() == 0.0);
      CHECK(tr.times[i] == doctest::Approx(0.1 * double(i)));
      if (p == 1) CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(tr.samples[i]).eigenvalues().minCoeff() >= -1e-12);
    }
    CHECK(tr.log[0].order == 1);
    CHECK(tr.log.back().order == p);
    for (const StepLog& s : tr.log) CHECK(s.care_residual <= 1e-12);
  }
}

TEST_CASE("steps without a stabilizing solution fall back to BDF(1)") {
  // y' = -8000 y - 400 y^2 + 1, y(0) = 400: the second BDF(2) step has no real solution.
  IntegrationOptions o;
  o.p = 2;
  o.h = 1e-3;
  o.keep_log = true;
  const ProjectedTrajectory tr = integrate(scalar(-4000), scalar(20), scalar(1), scalar(400), 0.05, o);
  CHECK(tr.reduced_steps >= 1);
  CHECK(tr.log[1].order == 1);
  CHECK(tr.log.back().order == 2);
  // equilibrium of the scalar equation
  const double ystar = (-8000 + std::sqrt(8000.0 * 8000.0 + 1600.0)) / 800.0;
  CHECK(tr.final()(0, 0) == doctest::Approx(ystar).epsilon(1e-8));
}
