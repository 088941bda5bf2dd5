#include "dre/oracle.hpp"

#include <cmath>
#include <mutex>

#include "dre/bdf.hpp"
#include "dre/dense_solvers.hpp"
#include "dre/errors.hpp"
#include "dre/rng.hpp"

namespace dre {

namespace {

constexpr Index kMaxDense = 200;

bool negative_sign(SignConvention c) {
  return c == SignConvention::minus_transposed || c == SignConvention::minus_plain;
}

bool transposed_tail(SignConvention c) {
  return c == SignConvention::minus_transposed || c == SignConvention::plus_transposed;
}

Matrix dense_coefficient(const DREProblem& p) {
  if (p.n() > kMaxDense) throw InvalidConfig("oracle: n = " + std::to_string(p.n()) + " exceeds 200");
  const Matrix N = Matrix(p.A);
  if (!p.E) return N;
  return Matrix(*p.E).partialPivLu().solve(N);
}

}  // namespace

std::string to_string(SignConvention c) {
  switch (c) {
    case SignConvention::minus_transposed: return "minus_transposed";
    case SignConvention::minus_plain: return "minus_plain";
    case SignConvention::plus_transposed: return "plus_transposed";
    case SignConvention::plus_plain: return "plus_plain";
  }
  return "unknown";
}

const std::vector<SignConvention>& all_sign_conventions() {
  static const std::vector<SignConvention> all{SignConvention::minus_transposed, SignConvention::minus_plain,
                                               SignConvention::plus_transposed, SignConvention::plus_plain};
  return all;
}

OracleData prepare_oracle(const DREProblem& problem, SignConvention convention) {
  const Matrix A = dense_coefficient(problem);
  const Index n = A.rows();
  OracleData d;
  d.convention = convention;
  d.X0 = problem.Z0.size() ? Matrix(problem.Z0 * problem.Z0.transpose()) : Matrix::Zero(n, n);
  Eigen::LLT<Matrix> llt(d.X0);
  if (llt.info() != Eigen::Success) throw InvalidConfig("oracle: X0 is not positive definite");

  try {
    d.Xtilde = solve_care(A, problem.B, problem.C.transpose() * problem.C).X;
  } catch (const Error& e) {
    throw NotObservable(std::string("oracle: no stabilizing ARE solution: ") + e.what());
  }
  Eigen::LLT<Matrix> pd(symmetrized(d.Xtilde));
  if (pd.info() != Eigen::Success) throw NotObservable("oracle: ARE solution is not positive definite");
  d.Atilde = A - problem.B * (problem.B.transpose() * d.Xtilde);

  const Matrix BBt = problem.B * problem.B.transpose();
  d.Ztilde = symmetrized(solve_lyapunov(d.Atilde.transpose(), negative_sign(convention) ? Matrix(-BBt) : BBt));

  Eigen::FullPivLU<Matrix> diff(d.X0 - d.Xtilde);
  if (!diff.isInvertible()) throw SingularBracket("oracle: X0 - Xtilde is singular");
  return d;
}

Matrix exact_solution(const OracleData& d, double t, ExactSolutionInfo* info) {
  const Matrix E = matrix_exponential(t * d.Atilde);
  const Matrix inv0 = (d.X0 - d.Xtilde).fullPivLu().inverse();
  const Matrix bracket = E * d.Ztilde * E.transpose() + inv0 - d.Ztilde;
  Eigen::FullPivLU<Matrix> lu(bracket);
  if (!lu.isInvertible()) throw SingularBracket("exact_solution: bracket is singular at t = " + std::to_string(t));
  const double cond = 1.0 / std::max(lu.rcond(), 1e-300);
  if (info) {
    info->bracket_condition = cond;
    info->ill_conditioned = cond > 1e12;
  }
  const Matrix tail = transposed_tail(d.convention) ? Matrix(E.transpose()) : E;
  return d.Xtilde + E.transpose() * lu.solve(tail);
}

Matrix exact_solution(const DREProblem& problem, double t, ExactSolutionInfo* info) {
  return exact_solution(prepare_oracle(problem, resolve_sign_convention()), t, info);
}

std::vector<Matrix> dense_reference_integrate(const DREProblem& problem, double h_ref,
                                              const std::vector<double>& t_grid) {
  const Matrix A = dense_coefficient(problem);
  const Index n = A.rows();
  if (t_grid.empty()) return {};
  double t_max = 0.0;
  std::vector<long> wanted;
  for (double t : t_grid) {
    SolverConfig probe;
    probe.h = h_ref;
    wanted.push_back(probe.steps_for(t));
    t_max = std::max(t_max, t);
  }
  IntegrationOptions opt;
  opt.p = 2;
  opt.h = h_ref;
  std::vector<Matrix> out(t_grid.size());
  opt.observer = [&](long k, double, const Matrix& X) {
    for (std::size_t i = 0; i < wanted.size(); ++i)
      if (wanted[i] == k) out[i] = X;
  };
  const Matrix X0 = problem.Z0.size() ? Matrix(problem.Z0 * problem.Z0.transpose()) : Matrix::Zero(n, n);
  integrate_arole(A, problem.B, problem.C.transpose() * problem.C, X0, t_max, opt);
  return out;
}

DREProblem oracle_instance(Index n, std::uint64_t seed) {
  Rng rng(seed);
  DREProblem p;
  const Matrix A = rng.split(1).normal(n, n) / std::sqrt(double(n)) - 1.5 * Matrix::Identity(n, n);
  p.A = A.sparseView();
  p.B = rng.split(2).normal(n, 2);
  p.C = rng.split(3).normal(2, n);
  p.Z0 = Matrix::Identity(n, n) + 0.3 * rng.split(4).normal(n, n);
  p.T_f = 1.0;
  p.name = "oracle_instance_n" + std::to_string(n) + "_s" + std::to_string(seed);
  return p;
}

DREProblem scalar_riccati(double x0) {
  DREProblem p;
  p.A = SparseMatrix(1, 1);
  p.A.insert(0, 0) = 0.0;
  p.A.makeCompressed();
  p.B = Matrix::Ones(1, 1);
  p.C = Matrix::Ones(1, 1);
  p.Z0 = Matrix::Constant(1, 1, std::sqrt(x0));
  p.T_f = 1.0;
  p.name = "scalar_riccati";
  return p;
}

ConventionResolution resolve_sign_conventions() {
  const std::vector<DREProblem> set{scalar_riccati(0.9), oracle_instance(5, 11), oracle_instance(5, 12)};
  const std::vector<double> times{0.25, 0.5};
  ConventionResolution res;
  for (SignConvention c : all_sign_conventions()) res.checks.push_back({c, 0.0, true});
  for (const DREProblem& p : set) {
    const std::vector<Matrix> ref = dense_reference_integrate(p, 1e-4, times);
    for (auto& check : res.checks) {
      try {
        const OracleData d = prepare_oracle(p, check.convention);
        for (std::size_t i = 0; i < times.size(); ++i) {
          const double err = (exact_solution(d, times[i]) - ref[i]).norm() / ref[i].norm();
          check.max_error = std::max(check.max_error, std::isfinite(err) ? err : INFINITY);
        }
      } catch (const Error&) {
        check.max_error = INFINITY;
      }
    }
  }
  int matches = 0;
  for (auto& check : res.checks) {
    check.matches = check.max_error <= 1e-6;
    if (check.matches) {
      res.selected = check.convention;
      ++matches;
    }
  }
  if (matches != 1) {
    std::string msg = "sign convention resolution: " + std::to_string(matches) + " conventions match (";
    for (const auto& check : res.checks) msg += to_string(check.convention) + "=" + std::to_string(check.max_error) + " ";
    throw NoConventionMatches(msg + ")");
  }
  return res;
}

SignConvention resolve_sign_convention() {
  static std::once_flag once;
  static SignConvention selected;
  std::call_once(once, [] { selected = resolve_sign_conventions().selected; });
  return selected;
}

}  // namespace dre
