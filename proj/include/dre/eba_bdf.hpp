#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dre/bdf.hpp"
#include "dre/extended_arnoldi.hpp"
#include "dre/problem.hpp"

namespace dre {

/// Cheap Galerkin residual norm at the final time:
///   value = || T_sub * (last 2s rows of Y) ||_2,
/// zero when the basis spans an invariant subspace.
struct ResidualEstimate {
  Index m = 0;
  double value = 0.0;
  Matrix T_sub;
  Matrix Y_hat;
};

ResidualEstimate residual_estimate(const ExtendedKrylovBasis& basis, Index blocks, const Matrix& Y_final);

struct ConvergenceRow {
  Index m = 0;
  double residual = 0.0;
  Index rank = 0;
  long operator_applications = 0;
  double seconds = 0.0;
};

/// X(T_f) ~ Z Z^T together with everything needed to reconstruct or post-process it.
struct LowRankSolution {
  Matrix Z;
  Index rank = 0;
  Index m = 0;
  ResidualEstimate residual;
  bool converged = false;
  bool breakdown = false;

  std::shared_ptr<const ExtendedKrylovBasis> basis;
  Index blocks = 0;  // number of basis blocks used by the projection
  ProjectedMatrices projected;
  ProjectedTrajectory trajectory;
  std::vector<ConvergenceRow> trace;

  /// V_m for the blocks in use (n x 2ms). Empty for non-projected solutions.
  Matrix basis_vectors() const;
};

/// Z = V U_l Sigma_l^{1/2} from the truncated eigen-decomposition of Y.
/// Throws IndefiniteY when Y has eigenvalues below -1e-8 sigma_max.
LowRankSolution extract_factor(const ExtendedKrylovBasis& basis, Index blocks, const Matrix& Y_final,
                               double dtol);

/// Same factor recovery for an arbitrary orthonormal basis V.
Matrix factor_from_projection(const Matrix& V, const Matrix& Y, double dtol);

struct SolveOptions {
  long sample_stride = 0;          // trajectory sampling of the final integration
  bool require_convergence = true; // throw NotConverged after m_max
  bool keep_step_log = false;
};

/// Projection onto K^e_m(A^T, C^T) followed by BDF(p) integration of the
/// projected equation, for m = 1, 2, ... until the residual estimate at T_f
/// drops below config.tol.
LowRankSolution solve(const DREProblem& problem, const SolverConfig& config,
                      const SolveOptions& options = {});

/// CSV: m,residual,rank,operator_applications,seconds.
void write_convergence_csv(const std::string& path, const std::vector<ConvergenceRow>& trace);

}  // namespace dre
