#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dre/problem.hpp"

namespace dre {

/// Candidate readings of the closed-form solution
///   X(t) = Xt + e^{t At^T} [e^{t At} Zt e^{t At^T} + (X0 - Xt)^{-1} - Zt]^{-1} E(t),
/// At = A - B B^T Xt. Zt solves At Z + Z At^T + sign * B B^T = 0 and the last
/// factor E(t) is e^{t At^T} or e^{t At}.
enum class SignConvention {
  minus_transposed,  // sign = -1, E = e^{t At^T}
  minus_plain,       // sign = -1, E = e^{t At}
  plus_transposed,   // sign = +1, E = e^{t At^T}
  plus_plain,        // sign = +1, E = e^{t At}
};

std::string to_string(SignConvention c);
const std::vector<SignConvention>& all_sign_conventions();

struct OracleData {
  Matrix Xtilde;  // stabilizing solution of A^T X + X A - X B B^T X + C^T C = 0
  Matrix Atilde;
  Matrix Ztilde;
  Matrix X0;
  SignConvention convention = SignConvention::minus_plain;
};

/// Throws InvalidConfig (n > 200 or X0 not positive definite), NotObservable
/// (no positive definite stabilizing ARE solution) and SingularBracket.
OracleData prepare_oracle(const DREProblem& problem, SignConvention convention);

struct ExactSolutionInfo {
  double bracket_condition = 0.0;
  bool ill_conditioned = false;  // condition above 1e12
};

Matrix exact_solution(const OracleData& data, double t, ExactSolutionInfo* info = nullptr);
/// Uses the convention returned by resolve_sign_convention().
Matrix exact_solution(const DREProblem& problem, double t, ExactSolutionInfo* info = nullptr);

/// Dense BDF(2) on the full equation, each step a dense CARE. Every t in
/// `t_grid` must be a multiple of h_ref. Throws StepFailure and InvalidConfig.
std::vector<Matrix> dense_reference_integrate(const DREProblem& problem, double h_ref,
                                              const std::vector<double>& t_grid);

/// Seeded small instance with X0 positive definite:
/// A = G / sqrt(n) - 1.5 I (stable with high probability), B n x 2, C 2 x n, Z0 = I + 0.3 H (G, H standard normal).
DREProblem oracle_instance(Index n, std::uint64_t seed);

/// Scalar x' = 1 - x^2 (a = 0, b = c = 1) with x(0) = x0.
DREProblem scalar_riccati(double x0);

struct ConventionCheck {
  SignConvention convention;
  double max_error = 0.0;  // worst relative error over the validation set
  bool matches = false;
};

struct ConventionResolution {
  SignConvention selected = SignConvention::minus_plain;
  std::vector<ConventionCheck> checks;
};

/// Compares every convention against dense_reference_integrate on the scalar
/// problem and two seeded n = 5 instances (relative tolerance 1e-6 at
/// t = 0.25 and t = 0.5). Throws NoConventionMatches unless exactly one
/// convention matches every instance.
ConventionResolution resolve_sign_conventions();
/// Cached result of resolve_sign_conventions().
SignConvention resolve_sign_convention();

}  // namespace dre
