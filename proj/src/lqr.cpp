#include "dre/lqr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "dre/dense_solvers.hpp"
#include "dre/errors.hpp"

namespace dre {

namespace {

Matrix dense_coefficient(const DREProblem& p) {
  const Matrix N = Matrix(p.A);
  if (!p.E) return N;
  return Matrix(*p.E).partialPivLu().solve(N);
}

// I - h A, which stays factorizable when A itself is singular.
LinearOperator implicit_euler_operator(const DREProblem& p, double h) {
  SparseMatrix I(p.n(), p.n());
  I.setIdentity();
  if (p.E) return LinearOperator::factorize(SparseMatrix(*p.E - h * p.A), *p.E);
  return LinearOperator::factorize(SparseMatrix(I - h * p.A));
}

}  // namespace

CostReport optimal_cost(const Matrix& Z, const Vector& x0, const std::string& method) {
  if (Z.rows() != x0.size()) throw DimensionMismatch("optimal_cost: x0 has wrong length");
  return {(Z.transpose() * x0).squaredNorm(), x0, method};
}

CostReport optimal_cost(const LowRankSolution& solution, const Vector& x0) {
  return optimal_cost(solution.Z, x0, "eba");
}

CostIdentity projected_cost_identity_check(const Matrix& V, const Matrix& Y_final, const Vector& x0) {
  if (V.rows() != x0.size() || V.cols() != Y_final.rows())
    throw DimensionMismatch("projected_cost_identity_check: inconsistent shapes");
  CostIdentity c;
  const Vector xm = V.transpose() * x0;
  c.reduced = xm.dot(Y_final * xm);
  const Matrix X = V * Y_final * V.transpose();
  c.full = x0.dot(X * x0);
  c.discrepancy = std::abs(c.reduced - c.full);
  return c;
}

CostIdentity projected_cost_identity_check(const LowRankSolution& solution, const Vector& x0) {
  return projected_cost_identity_check(solution.basis_vectors(), solution.trajectory.final(), x0);
}

Matrix GainSchedule::reduced_gain(double t) const {
  if (times.empty()) throw DimensionMismatch("GainSchedule: empty schedule");
  if (t <= times.front()) return Kred.front();
  if (t >= times.back()) return Kred.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - times.begin());
  const double w = (t - times[j - 1]) / (times[j] - times[j - 1]);
  return (1.0 - w) * Kred[j - 1] + w * Kred[j];
}

GainSchedule gain_schedule(const LowRankSolution& solution, double T_f) {
  const ProjectedTrajectory& tr = solution.trajectory;
  if (tr.samples.size() < 2) throw DimensionMismatch("gain_schedule: trajectory has no samples");
  GainSchedule g;
  g.T_f = T_f;
  g.V = solution.basis_vectors();
  // P(t) = X(T_f - t): walk the stored trajectory backwards.
  for (std::size_t i = tr.samples.size(); i-- > 0;) {
    g.times.push_back(T_f - tr.times[i]);
    g.Kred.push_back(-solution.projected.Bm.transpose() * tr.samples[i]);
  }
  return g;
}

GainSchedule gain_schedule(const Matrix& B, const std::vector<double>& tau, const std::vector<Matrix>& X,
                           double T_f) {
  if (tau.size() != X.size() || tau.empty()) throw DimensionMismatch("gain_schedule: sample count mismatch");
  GainSchedule g;
  g.T_f = T_f;
  g.V = Matrix::Identity(B.rows(), B.rows());
  for (std::size_t i = tau.size(); i-- > 0;) {
    g.times.push_back(T_f - tau[i]);
    g.Kred.push_back(-B.transpose() * X[i]);
  }
  return g;
}

ClosedLoopRun simulate_closed_loop(const DREProblem& problem, const GainSchedule& schedule, const Vector& x0,
                                   double h_sim) {
  const Index n = problem.n();
  if (x0.size() != n || schedule.V.rows() != n) throw DimensionMismatch("simulate_closed_loop: shapes");
  SolverConfig probe;
  probe.h = h_sim;
  const long steps = probe.steps_for(schedule.T_f);

  const LinearOperator M = implicit_euler_operator(problem, h_sim);
  const Matrix U = h_sim * problem.B;
  const Matrix MinvU = M.solve(U);
  const Index l = problem.B.cols();
  const Matrix VtMinvU = schedule.V.transpose() * MinvU;

  ClosedLoopRun run;
  auto energy = [&](const Vector& x, double t) {
    const Vector y = problem.C * x;
    const Vector u = schedule.reduced_gain(t) * (schedule.V.transpose() * x);
    return y.squaredNorm() + u.squaredNorm();
  };
  Vector x = x0;
  run.times.push_back(0.0);
  run.output_energy.push_back(energy(x, 0.0));
  for (long k = 1; k <= steps; ++k) {
    const double t = k == steps ? schedule.T_f : double(k) * h_sim;
    // (I - h A - h B K) x_new = x  with  K = Kred V^T
    const Matrix W = schedule.reduced_gain(t);  // l x k
    const Vector y = M.solve(Matrix(x));
    const Matrix cap = Matrix::Identity(l, l) - W * VtMinvU;
    x = y + MinvU * cap.partialPivLu().solve(W * (schedule.V.transpose() * y));
    run.times.push_back(t);
    run.output_energy.push_back(energy(x, t));
    run.running_cost += 0.5 * (run.times[k] - run.times[k - 1]) * (run.output_energy[k] + run.output_energy[k - 1]);
  }
  run.x_final = x;
  if (problem.Z0.size()) run.terminal_cost = (problem.Z0.transpose() * x).squaredNorm();
  run.realized_cost = run.running_cost + run.terminal_cost;
  return run;
}

SteadyState steady_state(const DREProblem& problem, double tol, int m_max) {
  SteadyState ss;
  const Index n = problem.n();
  const Matrix Q = problem.C.transpose() * problem.C;
  if (n <= 200) {
    const Matrix A = dense_coefficient(problem);
    const CareResult r = solve_care(A, problem.B, Q);
    ss.X = symmetrized(r.X);
    ss.residual = care_residual(A, problem.B, Q, ss.X);
    ss.dense_solution = true;
    const TruncatedFactor tf = truncate_svd(ss.X, 1e-14);
    ss.Z = tf.U * tf.sigma.cwiseSqrt().asDiagonal();
    return ss;
  }

  const LinearOperator op = LinearOperator::factorize(problem);
  const TransposedOperator M(op);
  ExtendedKrylovBasis basis = ExtendedKrylovBasis::seed(M, problem.C.transpose());
  for (int m = 1; m <= m_max; ++m) {
    if (!basis.breakdown()) {
      try {
        basis.expand(M);
      } catch (const Breakdown&) {
      }
    }
    const Index blocks = basis.breakdown() ? basis.usable_blocks() : m;
    const ProjectedMatrices pm = projected_matrices(basis, problem.B, blocks);
    const CareResult r = solve_care(pm.T.transpose(), pm.Bm, pm.Cm.transpose() * pm.Cm);
    const ResidualEstimate est = residual_estimate(basis, blocks, r.X);
    ss.m = blocks;
    ss.residual = est.value;
    if (basis.breakdown() || est.value < tol || m == m_max) {
      ss.Z = factor_from_projection(basis.basis(blocks), r.X, 1e-14);
      if (!(basis.breakdown() || est.value < tol))
        throw NotConverged("steady_state: residual " + std::to_string(est.value) + " after m_max iterations");
      return ss;
    }
  }
  throw NotConverged("steady_state: no iterations");
}

double difference_norm(const Matrix& Z1, const Matrix& Z2) {
  if (Z1.rows() != Z2.rows()) throw DimensionMismatch("difference_norm: row counts differ");
  const Index n = Z1.rows(), r1 = Z1.cols(), r2 = Z2.cols();
  if (r1 + r2 == 0) return 0.0;
  Matrix W(n, r1 + r2);
  W << Z1, Z2;
  Eigen::HouseholderQR<Matrix> qr(W);
  const Index q = std::min(n, r1 + r2);
  const Matrix R = qr.matrixQR().topRows(q).triangularView<Eigen::Upper>();
  Vector s(r1 + r2);
  s << Vector::Ones(r1), -Vector::Ones(r2);
  return (R * s.asDiagonal() * R.transpose()).norm();
}

double factor_norm(const Matrix& Z) { return (Z.transpose() * Z).norm(); }

void write_gain_schedule_csv(const std::string& path, const GainSchedule& schedule) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  const Index l = schedule.inputs(), n = schedule.V.rows();
  out << "t";
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < l; ++i) out << ",K_" << i + 1 << '_' << j + 1;
  out << '\n' << std::setprecision(12);
  for (std::size_t s = 0; s < schedule.times.size(); ++s) {
    const Matrix K = schedule.dense(s);
    out << schedule.times[s];
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < l; ++i) out << ',' << K(i, j);
    out << '\n';
  }
}

}  // namespace dre
