#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dre/dense_solvers.hpp"
#include "dre/problem.hpp"
#include "dre/types.hpp"

namespace dre {

/// BDF(p):  Y_{k+1} = sum_i alpha_i Y_{k-i} + h beta F(Y_{k+1}).
struct BDFCoefficients {
  int p = 1;
  double beta = 1.0;
  std::array<double, 3> alpha{1.0, 0.0, 0.0};
};

/// Exact rational values for p in {1,2,3}; throws UnsupportedOrder otherwise.
BDFCoefficients bdf_coefficients(int p);

/// Per-step algebraic Riccati equation
///   curlyA^T Y + Y curlyA - Y curlyB curlyB^T Y + Qstep = 0.
struct CareStepData {
  Matrix curlyA;  // h beta T^T - I/2, the A-role matrix of  dY/dt = T Y + Y T^T - ...
  Matrix curlyB;  // sqrt(h beta) Bm
  Matrix Qstep;   // h beta Cm^T Cm + sum_i alpha_i Y_{k-i}
};

/// Assembly for  dY/dt = T Y + Y T^T - Y Bm Bm^T Y + Cm^T Cm.
/// `history` holds the last p iterates, most recent first.
CareStepData assemble_care_step(const Matrix& T, const Matrix& Bm, const Matrix& Cm,
                                std::span<const Matrix> history, double h,
                                const BDFCoefficients& coeffs);

/// Same assembly for a DRE written with its A-role matrix directly
/// (dX/dt = A^T X + X A - X B B^T X + Q0).
CareStepData assemble_care_step_arole(const Matrix& A, const Matrix& B, const Matrix& Q0,
                                      std::span<const Matrix> history, double h,
                                      const BDFCoefficients& coeffs);

struct StepLog {
  long k = 0;
  double t = 0.0;
  int order = 0;  // BDF order actually used for this step
  int newton_iterations = 0;
  double care_residual = 0.0;
};

struct StepResult {
  Matrix Y;
  StepLog log;
};

/// Solves one step's CARE warm-started at `warm_start`.
StepResult bdf_step(const CareStepData& step, const Matrix& warm_start, const CareOptions& care);

struct ProjectedTrajectory {
  double h = 0.0;
  long steps = 0;
  std::vector<double> times;    // sampled times, always t = 0 and t = T_f
  std::vector<Matrix> samples;  // Y at the sampled times
  /// Up to 4 final iterates, most recent first (Y_N, Y_{N-1}, ...).
  std::vector<Matrix> final_history;
  BDFCoefficients last_coefficients;  // coefficients of the final step
  long reduced_steps = 0;             // steps redone with BDF(1) after the startup ramp
  std::vector<StepLog> log;

  const Matrix& final() const { return samples.back(); }
};

struct IntegrationOptions {
  int p = 2;
  double h = 1e-3;
  CareOptions care;
  long sample_stride = 0;  // 0: keep only t = 0 and t = T_f
  bool keep_log = false;
  /// Called with (k, t_k, Y_k) for k = 0..N.
  std::function<void(long, double, const Matrix&)> observer;
};

IntegrationOptions integration_options(const SolverConfig& config, long sample_stride = 0);

/// BDF(p) on  dY/dt = T Y + Y T^T - Y Bm Bm^T Y + Cm^T Cm  over [0, T_f] with
/// a lower-order startup ramp. A step of order > 1 whose CARE has no
/// stabilizing solution (possible with indefinite Qstep) or whose result is
/// strongly indefinite (Y + 0.1 ||Y||_F I not positive definite) is redone
/// with BDF(1). Throws StepFailure.
ProjectedTrajectory integrate(const Matrix& T, const Matrix& Bm, const Matrix& Cm, const Matrix& Y0,
                              double T_f, const IntegrationOptions& options);

/// BDF(p) on  dX/dt = A^T X + X A - X B B^T X + Q0  (A-role form).
ProjectedTrajectory integrate_arole(const Matrix& A, const Matrix& B, const Matrix& Q0,
                                    const Matrix& X0, double T_f, const IntegrationOptions& options);

/// CSV: k,t,order,newton_iterations,care_residual.
void write_step_log(const std::string& path, const ProjectedTrajectory& trajectory);

}  // namespace dre
