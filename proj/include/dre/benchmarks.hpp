#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "dre/problem.hpp"

namespace dre {

/// Coefficients of  L u = Laplace(u) - f1 u_x + f2 u_y + g1 u  on the unit square.
struct ConvDiffCoefficients {
  std::function<double(double, double)> f1;
  std::function<double(double, double)> f2;
  std::function<double(double, double)> g1;

  /// f1 = 10xy, f2 = exp(x^2 y), g1 = 20y.
  static ConvDiffCoefficients standard();
  static ConvDiffCoefficients laplacian();
};

/// 5-point finite differences on the n0 x n0 interior grid, mesh 1/(n0+1),
/// homogeneous Dirichlet data, centered first and second differences,
/// coefficients sampled at the nodes. Unknown (i, j) (x index i, y index j,
/// both 1-based) is stored at row (j-1)*n0 + (i-1).
SparseMatrix convdiff2d_matrix(Index n0, const ConvDiffCoefficients& coeffs = ConvDiffCoefficients::standard());

/// A from convdiff2d_matrix; B (n x l), C (s x n) and Z0 (n x 2) uniform on [0,1)
/// from independent substreams of `seed`. T_f = 1.
DREProblem gen_convdiff2d(Index n0, Index s, Index l, std::uint64_t seed);

/// Mass and stiffness matrices of the 1D heat problem with linear elements:
/// M = tridiag(1,4,1)/(6n), K = -alpha n tridiag(-1,2,-1).
SparseMatrix heat1d_mass(Index n);
SparseMatrix heat1d_stiffness(Index n, double alpha);

/// A = -(M - dt K)^{-1} M in descriptor form (A = E^{-1} N with E = M - dt K,
/// N = -M), B = dt (M - dt K)^{-1} F, F and C uniform on [0,1), s = l,
/// X0 = 0 via a zero n x 2 factor. T_f = 2. Throws SingularMassStiffness.
DREProblem gen_heat1d_fem(Index n, Index s, double alpha, double dt, std::uint64_t seed);

enum class Family { convdiff2d, heat1d_fem, matrixmarket };

std::string to_string(Family f);
Family family_from_string(const std::string& name);

struct BenchmarkSpec {
  Family family = Family::convdiff2d;
  Index n0 = 7;      // convdiff2d grid
  Index n = 49;      // heat1d_fem order
  Index s = 2;
  Index l = 2;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  double dt = 0.01;
  double T_f = 1.0;  // overrides the family preset when set through the CLI
  // matrixmarket paths
  std::string path_A, path_B, path_C, path_Z0, path_E;
};

DREProblem generate(const BenchmarkSpec& spec);

/// Reads A, B, C (and optionally Z0 and a mass matrix E) from Matrix Market
/// files. An empty Z0 path gives a single zero column.
DREProblem load_matrixmarket(const std::string& path_A, const std::string& path_B,
                             const std::string& path_C, const std::string& path_Z0, double T_f,
                             const std::string& path_E = {});

}  // namespace dre
