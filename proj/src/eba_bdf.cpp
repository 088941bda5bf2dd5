#include "dre/eba_bdf.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>

#include "dre/dense_solvers.hpp"
#include "dre/errors.hpp"

namespace dre {

ResidualEstimate residual_estimate(const ExtendedKrylovBasis& basis, Index blocks, const Matrix& Y_final) {
  ResidualEstimate r;
  r.m = blocks;
  const Index bs = basis.block_size();
  if (Y_final.rows() != bs * blocks) throw DimensionMismatch("residual_estimate: Y has wrong order");
  r.Y_hat = Y_final.bottomRows(bs);
  r.T_sub = basis.T_sub(blocks);
  if (r.T_sub.size() == 0) {
    r.value = 0.0;
    return r;
  }
  r.value = spectral_norm(r.T_sub * r.Y_hat);
  return r;
}

Matrix LowRankSolution::basis_vectors() const {
  if (!basis) return Matrix(0, 0);
  return basis->basis(blocks);
}

Matrix factor_from_projection(const Matrix& V, const Matrix& Y, double dtol) {
  if (Y.rows() == 0) return Matrix::Zero(V.rows(), 0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(Y));
  const Vector& lam = es.eigenvalues();
  const double smax = lam.cwiseAbs().maxCoeff();
  if (lam.minCoeff() < -1e-8 * smax)
    throw IndefiniteY("Y has eigenvalue " + std::to_string(lam.minCoeff()) + " (sigma_max " +
                      std::to_string(smax) + ")");
  // Negative eigenvalues above the threshold are clipped to zero.
  const TruncatedFactor tf = truncate_svd(es.eigenvectors() * lam.cwiseMax(0.0).asDiagonal() *
                                              es.eigenvectors().transpose(),
                                          dtol);
  return V * (tf.U * tf.sigma.cwiseSqrt().asDiagonal());
}

LowRankSolution extract_factor(const ExtendedKrylovBasis& basis, Index blocks, const Matrix& Y_final,
                               double dtol) {
  LowRankSolution sol;
  sol.Z = factor_from_projection(basis.basis(blocks), Y_final, dtol);
  sol.rank = sol.Z.cols();
  sol.m = blocks;
  sol.blocks = blocks;
  return sol;
}

LowRankSolution solve(const DREProblem& problem, const SolverConfig& config, const SolveOptions& options) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  config.validate(problem.T_f);
  if (problem.B.rows() != problem.n() || problem.C.cols() != problem.n())
    throw DimensionMismatch("solve: B or C does not conform with A");

  const LinearOperator op = LinearOperator::factorize(problem);
  const TransposedOperator M(op);
  auto basis = std::make_shared<ExtendedKrylovBasis>(ExtendedKrylovBasis::seed(M, problem.C.transpose()));

  IntegrationOptions iopt = integration_options(config);
  iopt.keep_log = options.keep_step_log;

  LowRankSolution sol;
  std::vector<ConvergenceRow> trace;
  bool have_result = false;
  for (int m = 1; m <= config.m_max; ++m) {
    if (!basis->breakdown()) {
      try {
        basis->expand(M);
      } catch (const Breakdown&) {
        // invariant subspace: the current blocks give a zero residual
      }
    }
    const bool broke = basis->breakdown();
    if (!broke && m % config.check_stride != 0 && m != config.m_max) continue;

    const Index blocks = broke ? basis->usable_blocks() : m;
    ProjectedMatrices pm = projected_matrices(*basis, problem.B, blocks);
    const Matrix V = basis->basis(blocks);
    const Matrix W0 = problem.Z0.size() ? Matrix(V.transpose() * problem.Z0) : Matrix::Zero(V.cols(), 0);
    const Matrix Y0 = W0 * W0.transpose();

    iopt.sample_stride = 0;
    ProjectedTrajectory traj = integrate(pm.T, pm.Bm, pm.Cm, Y0, problem.T_f, iopt);
    ResidualEstimate res = residual_estimate(*basis, blocks, traj.final());

    ConvergenceRow row;
    row.m = blocks;
    row.residual = res.value;
    row.rank = truncate_svd(traj.final(), config.dtol).rank();
    row.operator_applications = op.matvecs() + op.solves();
    row.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    trace.push_back(row);

    sol.residual = std::move(res);
    sol.blocks = blocks;
    sol.m = blocks;
    sol.projected = std::move(pm);
    sol.trajectory = std::move(traj);
    sol.breakdown = broke;
    have_result = true;
    if (broke || sol.residual.value < config.tol) {
      sol.converged = true;
      break;
    }
  }
  if (!have_result) throw NotConverged("solve: no residual test was performed");

  // Re-integrate with sampling only when requested; the final run is reused otherwise.
  if (options.sample_stride > 0) {
    const Matrix V = basis->basis(sol.blocks);
    const Matrix W0 = problem.Z0.size() ? Matrix(V.transpose() * problem.Z0) : Matrix::Zero(V.cols(), 0);
    iopt.sample_stride = options.sample_stride;
    sol.trajectory = integrate(sol.projected.T, sol.projected.Bm, sol.projected.Cm, W0 * W0.transpose(),
                               problem.T_f, iopt);
  }

  sol.trace = std::move(trace);
  sol.basis = basis;
  sol.Z = factor_from_projection(basis->basis(sol.blocks), sol.trajectory.final(), config.dtol);
  sol.rank = sol.Z.cols();
  if (!sol.converged && options.require_convergence)
    throw NotConverged("solve: residual " + std::to_string(sol.residual.value) + " after m_max = " +
                       std::to_string(config.m_max) + " iterations");
  return sol;
}

void write_convergence_csv(const std::string& path, const std::vector<ConvergenceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << "m,residual,rank,operator_applications,seconds\n" << std::setprecision(10);
  for (const auto& r : trace)
    out << r.m << ',' << r.residual << ',' << r.rank << ',' << r.operator_applications << ','
        << r.seconds << '\n';
}

}  // namespace dre
