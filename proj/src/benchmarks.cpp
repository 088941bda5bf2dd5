#include "dre/benchmarks.hpp"

#include <Eigen/SparseLU>
#include <cmath>

#include "dre/errors.hpp"
#include "dre/matrix_market.hpp"
#include "dre/rng.hpp"

namespace dre {

namespace {

enum Stream : std::uint64_t { kB = 1, kC = 2, kZ0 = 3, kF = 4 };

SparseMatrix tridiag(Index n, double lo, double d, double up) {
  std::vector<Triplet> t;
  t.reserve(3 * n);
  for (Index i = 0; i < n; ++i) {
    t.emplace_back(i, i, d);
    if (i > 0) t.emplace_back(i, i - 1, lo);
    if (i + 1 < n) t.emplace_back(i, i + 1, up);
  }
  SparseMatrix M(n, n);
  M.setFromTriplets(t.begin(), t.end());
  M.makeCompressed();
  return M;
}

}  // namespace

ConvDiffCoefficients ConvDiffCoefficients::standard() {
  return {[](double x, double y) { return 10.0 * x * y; },
          [](double x, double y) { return std::exp(x * x * y); },
          [](double, double y) { return 20.0 * y; }};
}

ConvDiffCoefficients ConvDiffCoefficients::laplacian() {
  auto zero = [](double, double) { return 0.0; };
  return {zero, zero, zero};
}

SparseMatrix convdiff2d_matrix(Index n0, const ConvDiffCoefficients& c) {
  if (n0 < 1) throw InvalidConfig("convdiff2d: n0 must be positive");
  const Index n = n0 * n0;
  const double hg = 1.0 / double(n0 + 1);
  const double d2 = 1.0 / (hg * hg);
  const double d1 = 1.0 / (2.0 * hg);
  std::vector<Triplet> t;
  t.reserve(5 * n);
  for (Index j = 1; j <= n0; ++j) {
    for (Index i = 1; i <= n0; ++i) {
      const double x = double(i) * hg, y = double(j) * hg;
      const Index r = (j - 1) * n0 + (i - 1);
      const double f1 = c.f1(x, y), f2 = c.f2(x, y);
      t.emplace_back(r, r, -4.0 * d2 + c.g1(x, y));
      if (i < n0) t.emplace_back(r, r + 1, d2 - f1 * d1);
      if (i > 1) t.emplace_back(r, r - 1, d2 + f1 * d1);
      if (j < n0) t.emplace_back(r, r + n0, d2 + f2 * d1);
      if (j > 1) t.emplace_back(r, r - n0, d2 - f2 * d1);
    }
  }
  SparseMatrix A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();
  return A;
}

DREProblem gen_convdiff2d(Index n0, Index s, Index l, std::uint64_t seed) {
  if (s < 1 || l < 1) throw InvalidConfig("convdiff2d: s and l must be positive");
  const Rng rng(seed);
  DREProblem p;
  p.A = convdiff2d_matrix(n0);
  const Index n = p.A.rows();
  p.B = rng.split(kB).uniform(n, l);
  p.C = rng.split(kC).uniform(s, n);
  p.Z0 = rng.split(kZ0).uniform(n, 2);
  p.T_f = 1.0;
  p.name = "convdiff2d_n0=" + std::to_string(n0);
  return p;
}

SparseMatrix heat1d_mass(Index n) {
  SparseMatrix M = tridiag(n, 1.0, 4.0, 1.0);
  M *= 1.0 / (6.0 * double(n));
  return M;
}

SparseMatrix heat1d_stiffness(Index n, double alpha) {
  SparseMatrix K = tridiag(n, -1.0, 2.0, -1.0);
  K *= -alpha * double(n);
  return K;
}

DREProblem gen_heat1d_fem(Index n, Index s, double alpha, double dt, std::uint64_t seed) {
  if (n < 2 || s < 1) throw InvalidConfig("heat1d_fem: need n >= 2 and s >= 1");
  if (!(alpha > 0.0) || !(dt > 0.0)) throw InvalidConfig("heat1d_fem: alpha and dt must be positive");
  const Rng rng(seed);
  const SparseMatrix M = heat1d_mass(n);
  const SparseMatrix K = heat1d_stiffness(n, alpha);
  SparseMatrix E = M - dt * K;
  E.makeCompressed();

  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(E);
  if (lu.info() != Eigen::Success) throw SingularMassStiffness("heat1d_fem: M - dt K is singular");
  const Matrix F = rng.split(kF).uniform(n, s);

  DREProblem p;
  p.A = -M;
  p.E = E;
  p.B = dt * lu.solve(F);
  if (!p.B.allFinite()) throw SingularMassStiffness("heat1d_fem: M - dt K solve failed");
  p.C = rng.split(kC).uniform(s, n);
  p.Z0 = Matrix::Zero(n, 2);
  p.T_f = 2.0;
  p.name = "heat1d_fem_n=" + std::to_string(n);
  return p;
}

std::string to_string(Family f) {
  switch (f) {
    case Family::convdiff2d: return "convdiff2d";
    case Family::heat1d_fem: return "heat1d_fem";
    case Family::matrixmarket: return "matrixmarket";
  }
  return "unknown";
}

Family family_from_string(const std::string& name) {
  if (name == "convdiff2d") return Family::convdiff2d;
  if (name == "heat1d_fem") return Family::heat1d_fem;
  if (name == "matrixmarket") return Family::matrixmarket;
  throw InvalidConfig("unknown benchmark family '" + name + "'");
}

DREProblem generate(const BenchmarkSpec& spec) {
  DREProblem p;
  switch (spec.family) {
    case Family::convdiff2d: p = gen_convdiff2d(spec.n0, spec.s, spec.l, spec.seed); break;
    case Family::heat1d_fem: p = gen_heat1d_fem(spec.n, spec.s, spec.alpha, spec.dt, spec.seed); break;
    case Family::matrixmarket:
      p = load_matrixmarket(spec.path_A, spec.path_B, spec.path_C, spec.path_Z0, spec.T_f, spec.path_E);
      break;
  }
  p.T_f = spec.T_f;
  return p;
}

DREProblem load_matrixmarket(const std::string& path_A, const std::string& path_B, const std::string& path_C,
                             const std::string& path_Z0, double T_f, const std::string& path_E) {
  DREProblem p;
  p.A = read_matrix_market(path_A);
  const Index n = p.A.rows();
  if (p.A.cols() != n) throw DimensionMismatch(path_A + ": A must be square");
  if (!path_E.empty()) {
    p.E = read_matrix_market(path_E);
    if (p.E->rows() != n || p.E->cols() != n) throw DimensionMismatch(path_E + ": E must be n x n");
  }
  p.B = read_matrix_market_dense(path_B);
  if (p.B.rows() != n) throw DimensionMismatch(path_B + ": B must have n rows");
  p.C = read_matrix_market_dense(path_C);
  if (p.C.cols() != n && p.C.rows() == n) p.C.transposeInPlace();
  if (p.C.cols() != n) throw DimensionMismatch(path_C + ": C must have n columns");
  if (path_Z0.empty()) {
    p.Z0 = Matrix::Zero(n, 1);
  } else {
    p.Z0 = read_matrix_market_dense(path_Z0);
    if (p.Z0.rows() != n) throw DimensionMismatch(path_Z0 + ": Z0 must have n rows");
  }
  p.T_f = T_f;
  p.name = "matrixmarket:" + path_A;
  return p;
}

}  // namespace dre
