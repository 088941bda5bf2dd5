#pragma once

#include <string>
#include <vector>

#include "dre/eba_bdf.hpp"
#include "dre/problem.hpp"

namespace dre {

/// Cost x0^T X(T_f) x0 of the finite-horizon problem
///   min  x(T_f)^T X0 x(T_f) + int_0^{T_f} (y^T y + u^T u) dt,  x' = A x + B u,  y = C x.
struct CostReport {
  double J = 0.0;
  Vector x0;
  std::string method;
};

/// J = ||Z^T x0||^2 without forming X.
CostReport optimal_cost(const Matrix& Z, const Vector& x0, const std::string& method = "eba");
CostReport optimal_cost(const LowRankSolution& solution, const Vector& x0);

struct CostIdentity {
  double reduced = 0.0;      // x_m^T Y_m(T_f) x_m, x_m = V^T x0
  double full = 0.0;         // x0^T V Y_m(T_f) V^T x0
  double discrepancy = 0.0;  // |reduced - full|
};

CostIdentity projected_cost_identity_check(const Matrix& V, const Matrix& Y_final, const Vector& x0);
CostIdentity projected_cost_identity_check(const LowRankSolution& solution, const Vector& x0);

/// Feedback u(t) = K(t) x(t) with K(t) = -B^T X(T_f - t), stored factored as
/// K(t_j) = Kred_j V^T. Times are control times in increasing order.
struct GainSchedule {
  double T_f = 0.0;
  std::vector<double> times;
  std::vector<Matrix> Kred;  // l x k
  Matrix V;                  // n x k

  Index inputs() const { return Kred.empty() ? 0 : Kred.front().rows(); }
  /// Linear interpolation between samples; clamps outside [t_0, t_last].
  Matrix reduced_gain(double t) const;
  /// Dense l x n gain at sample j.
  Matrix dense(std::size_t j) const { return Kred[j] * V.transpose(); }
};

/// From a projected solution with trajectory samples (sample_stride > 0).
GainSchedule gain_schedule(const LowRankSolution& solution, double T_f);
/// From dense samples X(tau_i) (V = I).
GainSchedule gain_schedule(const Matrix& B, const std::vector<double>& tau, const std::vector<Matrix>& X,
                           double T_f);

struct ClosedLoopRun {
  std::vector<double> times;
  std::vector<double> output_energy;  // y^T y + u^T u at each time
  Vector x_final;
  double running_cost = 0.0;  // trapezoid rule
  double terminal_cost = 0.0; // x(T_f)^T X0 x(T_f)
  double realized_cost = 0.0;
};

/// Implicit Euler on x' = (A + B K(t)) x with step h_sim. Each step solves
/// with I - h_sim A (factorized once) and a Woodbury correction for B K.
ClosedLoopRun simulate_closed_loop(const DREProblem& problem, const GainSchedule& schedule, const Vector& x0,
                                   double h_sim);

/// Solution of A^T X + X A - X B B^T X + C^T C = 0.
struct SteadyState {
  Matrix X;  // dense, for n <= 200
  Matrix Z;  // factor X ~ Z Z^T (always set)
  double residual = 0.0;  // relative CARE residual (dense) or projected residual estimate
  Index m = 0;            // Arnoldi iterations for the projected variant
  bool dense_solution = false;
};

/// Dense solve_care for n <= 200, otherwise Galerkin projection of the
/// algebraic equation on K^e_m(A^T, C^T) with a dense CARE per m.
SteadyState steady_state(const DREProblem& problem, double tol = 1e-10, int m_max = 40);

/// ||Z1 Z1^T - Z2 Z2^T||_F through a QR of [Z1, Z2].
double difference_norm(const Matrix& Z1, const Matrix& Z2);
/// ||Z Z^T||_F.
double factor_norm(const Matrix& Z);

/// CSV: t,K_11,K_21,...  (column-major entries of the dense l x n gain).
void write_gain_schedule_csv(const std::string& path, const GainSchedule& schedule);

}  // namespace dre
