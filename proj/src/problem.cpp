#include "dre/problem.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/SparseLU>

#include "dre/errors.hpp"

namespace dre {

using SparseLu = Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>;

using SparseMatrixLd = Eigen::SparseMatrix<long double, Eigen::ColMajor>;
using SparseLuLd = Eigen::SparseLU<SparseMatrixLd, Eigen::COLAMDOrdering<int>>;

struct LinearOperator::Factors {
  SparseMatrix N;                  // numerator (A itself when E is absent)
  std::optional<SparseMatrix> E;   // descriptor mass matrix
  std::unique_ptr<SparseLu> lu_N;
  std::unique_ptr<SparseLu> lu_E;

  struct Extended {
    SparseMatrixLd N, E;
    SparseLuLd lu_N, lu_E;
    bool descriptor = false;
  };
  mutable std::once_flag ext_once;
  mutable std::unique_ptr<Extended> ext;

  Extended& extended() const {
    std::call_once(ext_once, [this] {
      auto x = std::make_unique<Extended>();
      x->N = N.cast<long double>();
      x->N.makeCompressed();
      x->lu_N.compute(x->N);
      if (x->lu_N.info() != Eigen::Success) throw SingularA("A: extended-precision LU failed");
      if (E) {
        x->descriptor = true;
        x->E = E->cast<long double>();
        x->E.makeCompressed();
        x->lu_E.compute(x->E);
        if (x->lu_E.info() != Eigen::Success) throw SingularA("E: extended-precision LU failed");
      }
      ext = std::move(x);
    });
    return *ext;
  }
};

namespace {

std::unique_ptr<SparseLu> lu_or_throw(const SparseMatrix& M, const char* what) {
  if (M.rows() != M.cols())
    throw DimensionMismatch(std::string(what) + " is not square");
  if (M.rows() == 0) throw DimensionMismatch(std::string(what) + " is empty");
  auto lu = std::make_unique<SparseLu>();
  SparseMatrix Mc = M;
  Mc.makeCompressed();
  lu->compute(Mc);
  if (lu->info() != Eigen::Success)
    throw SingularA(std::string(what) + ": sparse LU failed (" + lu->lastErrorMessage() + ")");

  // Backward-error probe: a tiny pivot shows up as a large roundtrip defect.
  const Index n = M.rows();
  Vector w(n);
  for (Index i = 0; i < n; ++i) w(i) = 1.0 + 0.37 * std::sin(1.0 + 2.3 * double(i));
  Vector x = lu->solve(w);
  const double defect = (Mc * x - w).norm() / w.norm();
  if (!x.allFinite() || !(defect <= 1e-6))
    throw SingularA(std::string(what) + ": factorization is numerically singular (roundtrip defect " +
                    std::to_string(defect) + ")");
  return lu;
}

SparseMatrix identity(Index n) {
  SparseMatrix I(n, n);
  I.setIdentity();
  return I;
}

}  // namespace

LinearOperator LinearOperator::factorize(const SparseMatrix& A) {
  auto f = std::make_shared<Factors>();
  f->N = A;
  f->N.makeCompressed();
  f->lu_N = lu_or_throw(f->N, "A");
  LinearOperator op;
  op.n_ = A.rows();
  op.factors_ = std::move(f);
  op.counters_ = std::make_shared<Counters>();
  return op;
}

LinearOperator LinearOperator::factorize(const SparseMatrix& N, const SparseMatrix& E) {
  if (N.rows() != E.rows() || N.cols() != E.cols())
    throw DimensionMismatch("descriptor pair has mismatched shapes");
  auto f = std::make_shared<Factors>();
  f->N = N;
  f->N.makeCompressed();
  f->E = E;
  f->E->makeCompressed();
  f->lu_N = lu_or_throw(f->N, "A");
  f->lu_E = lu_or_throw(*f->E, "E");
  LinearOperator op;
  op.n_ = N.rows();
  op.factors_ = std::move(f);
  op.counters_ = std::make_shared<Counters>();
  return op;
}

LinearOperator LinearOperator::factorize(const DREProblem& problem) {
  return problem.E ? factorize(problem.A, *problem.E) : factorize(problem.A);
}

Matrix LinearOperator::apply(const Matrix& V) const {
  counters_->matvecs += V.cols();
  Matrix W = factors_->N * V;
  if (factors_->lu_E) W = factors_->lu_E->solve(W);
  return W;
}

Matrix LinearOperator::apply_t(const Matrix& V) const {
  counters_->matvecs += V.cols();
  if (factors_->lu_E) {
    Matrix W = factors_->lu_E->transpose().solve(V);
    return factors_->N.transpose() * W;
  }
  return factors_->N.transpose() * V;
}

Matrix LinearOperator::solve(const Matrix& V) const {
  counters_->solves += V.cols();
  if (factors_->E) return factors_->lu_N->solve(*factors_->E * V);
  return factors_->lu_N->solve(V);
}

Matrix LinearOperator::solve_t(const Matrix& V) const {
  counters_->solves += V.cols();
  Matrix W = factors_->lu_N->transpose().solve(V);
  if (factors_->E) return factors_->E->transpose() * W;
  return W;
}

MatrixLd LinearOperator::apply_t_ext(const MatrixLd& V) const {
  counters_->matvecs += V.cols();
  auto& x = factors_->extended();
  if (x.descriptor) {
    MatrixLd W = x.lu_E.transpose().solve(V);
    return x.N.transpose() * W;
  }
  return x.N.transpose() * V;
}

MatrixLd LinearOperator::solve_t_ext(const MatrixLd& V) const {
  counters_->solves += V.cols();
  auto& x = factors_->extended();
  MatrixLd W = x.lu_N.transpose().solve(V);
  W += x.lu_N.transpose().solve(MatrixLd(V - x.N.transpose() * W));  // one refinement step
  if (x.descriptor) return x.E.transpose() * W;
  return W;
}

LinearOperator LinearOperator::affine(double scale, double shift) const {
  if (factors_->E) {
    // scale E^{-1} N + shift I = E^{-1} (scale N + shift E)
    SparseMatrix N = scale * factors_->N + shift * (*factors_->E);
    return factorize(N, *factors_->E);
  }
  SparseMatrix N = scale * factors_->N + shift * identity(n_);
  return factorize(N);
}

Matrix LinearOperator::to_dense() const {
  Matrix D = Matrix(factors_->N);
  if (factors_->lu_E) D = factors_->lu_E->solve(D);
  return D;
}

long SolverConfig::steps_for(double T_f) const {
  if (!(h > 0)) throw InvalidConfig("h must be positive");
  if (!(T_f >= 0)) throw InvalidConfig("T_f must be nonnegative");
  const double ratio = T_f / h;
  const long steps = std::lround(ratio);
  if (std::abs(ratio - double(steps)) > 1e-8 * std::max(1.0, ratio))
    throw InvalidConfig("T_f/h is not an integer number of steps");
  return steps;
}

void SolverConfig::validate(double T_f) const {
  if (p < 1 || p > 3) throw InvalidConfig("p must be in {1,2,3}");
  if (!(tol > 0)) throw InvalidConfig("tol must be positive");
  if (!(dtol > 0)) throw InvalidConfig("dtol must be positive");
  if (m_max < 1) throw InvalidConfig("m_max must be >= 1");
  if (check_stride < 1) throw InvalidConfig("check_stride must be >= 1");
  if (!(care_tol > 0) || care_maxit < 1) throw InvalidConfig("invalid CARE controls");
  steps_for(T_f);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (in.fail() || !in.eof())
    throw ParseError("config: bad value '" + value + "' for key '" + key + "'");
  return out;
}

}  // namespace

SolverConfig parse_config(const std::string& text) {
  SolverConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "p") c.p = parse_number<int>(key, value);
    else if (key == "h") c.h = parse_number<double>(key, value);
    else if (key == "tol") c.tol = parse_number<double>(key, value);
    else if (key == "m_max") c.m_max = parse_number<int>(key, value);
    else if (key == "dtol") c.dtol = parse_number<double>(key, value);
    else if (key == "check_stride") c.check_stride = parse_number<int>(key, value);
    else if (key == "care_tol") c.care_tol = parse_number<double>(key, value);
    else if (key == "care_maxit") c.care_maxit = parse_number<int>(key, value);
    else throw ParseError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  return c;
}

SolverConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_config_text(const SolverConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "p = " << c.p << "\nh = " << c.h << "\ntol = " << c.tol << "\nm_max = " << c.m_max
      << "\ndtol = " << c.dtol << "\ncheck_stride = " << c.check_stride
      << "\ncare_tol = " << c.care_tol << "\ncare_maxit = " << c.care_maxit << "\n";
  return out.str();
}

Index numerical_rank(const Matrix& M, double rel_tol) {
  if (M.size() == 0) return 0;
  Eigen::ColPivHouseholderQR<Matrix> qr(M);
  qr.setThreshold(rel_tol);
  return qr.rank();
}

ValidationReport validate(const DREProblem& problem) {
  ValidationReport r;
  const Index n = problem.A.rows();
  r.n = n;
  r.inputs = problem.B.cols();
  r.outputs = problem.C.rows();
  if (problem.A.cols() != n || n < 1) throw DimensionMismatch("A must be square and nonempty");
  if (problem.E && (problem.E->rows() != n || problem.E->cols() != n))
    throw DimensionMismatch("E must match A");
  if (problem.B.rows() != n)
    throw DimensionMismatch("B has " + std::to_string(problem.B.rows()) + " rows, expected " +
                            std::to_string(n));
  if (problem.C.cols() != n)
    throw DimensionMismatch("C has " + std::to_string(problem.C.cols()) + " columns, expected " +
                            std::to_string(n));
  if (problem.Z0.rows() != n && problem.Z0.size() != 0)
    throw DimensionMismatch("Z0 has " + std::to_string(problem.Z0.rows()) + " rows, expected " +
                            std::to_string(n));
  if (r.inputs < 1 || r.outputs < 1) throw DimensionMismatch("B and C must be nonempty");
  if (!(problem.T_f >= 0)) throw DimensionMismatch("T_f must be nonnegative");

  LinearOperator::factorize(problem);  // throws SingularA

  r.rank_B = numerical_rank(problem.B);
  r.rank_C = numerical_rank(problem.C.transpose());
  if (r.rank_B < r.inputs) {
    r.B_rank_deficient = true;
    r.issues.push_back("B is rank deficient (rank " + std::to_string(r.rank_B) + " < " +
                       std::to_string(r.inputs) + ")");
  }
  if (r.rank_C < r.outputs) {
    r.C_rank_deficient = true;
    r.issues.push_back("C is rank deficient (rank " + std::to_string(r.rank_C) + " < " +
                       std::to_string(r.outputs) + ")");
  }
  r.valid = r.issues.empty();
  return r;
}

}  // namespace dre
