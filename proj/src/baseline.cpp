#include "dre/baseline.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <map>

#include "dre/dense_solvers.hpp"
#include "dre/errors.hpp"

namespace dre {

namespace {

constexpr double kDeflationTol = 1e-12;

Matrix hcat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() ? a.rows() : b.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

// Frobenius norm of U D U^T from the Gram matrix (diagnostic scale only).
double gram_norm(const Matrix& U, const Vector& d) {
  if (U.cols() == 0) return 0.0;
  const Matrix G = d.asDiagonal() * (U.transpose() * U);
  return std::sqrt(std::max(0.0, (G * G).trace()));
}

}  // namespace

Matrix SignedLowRankFactor::dense() const { return Z * signature.asDiagonal() * Z.transpose(); }

SignedLowRankFactor SignedLowRankFactor::zero(Index n) { return {Matrix::Zero(n, 0), Vector(0)}; }

SignedLowRankFactor SignedLowRankFactor::positive(const Matrix& Z) {
  return {Z, Vector::Ones(Z.cols())};
}

SignedLowRankFactor SignedLowRankFactor::compressed(double dtol) const {
  const Index n = Z.rows();
  if (Z.cols() == 0) return zero(n);
  Eigen::HouseholderQR<Matrix> qr(Z);
  const Index k = std::min(n, Z.cols());
  const Matrix Q = qr.householderQ() * Matrix::Identity(n, k);
  const Matrix R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const Matrix core = R * signature.asDiagonal() * R.transpose();
  if (core.cwiseAbs().maxCoeff() == 0.0) return zero(n);
  const TruncatedFactor tf = truncate_svd(core, dtol);
  SignedLowRankFactor out;
  out.Z = Q * (tf.U * tf.sigma.cwiseSqrt().asDiagonal());
  out.signature = tf.sign;
  return out;
}

Matrix SignedLowRankFactor::psd_factor(double dtol) const {
  const SignedLowRankFactor c = compressed(dtol);
  Index keep = 0;
  for (Index i = 0; i < c.rank(); ++i) keep += c.signature(i) > 0;
  Matrix P(n(), keep);
  for (Index i = 0, j = 0; i < c.rank(); ++i)
    if (c.signature(i) > 0) P.col(j++) = c.Z.col(i);
  return P;
}

SignedLowRankFactor combine(double a, const SignedLowRankFactor& X, double b, const SignedLowRankFactor& Y) {
  if (X.n() != Y.n()) throw DimensionMismatch("combine: factors have different row counts");
  SignedLowRankFactor out;
  out.Z = hcat(std::sqrt(std::abs(a)) * X.Z, std::sqrt(std::abs(b)) * Y.Z);
  out.signature.resize(X.rank() + Y.rank());
  out.signature << (a < 0 ? -1.0 : 1.0) * X.signature, (b < 0 ? -1.0 : 1.0) * Y.signature;
  return out;
}

StackedConstantFactor StackedConstantFactor::build(const Matrix& C, double hb,
                                                   const std::vector<const SignedLowRankFactor*>& history,
                                                   const BDFCoefficients& coeffs) {
  if (static_cast<int>(history.size()) != coeffs.p)
    throw DimensionMismatch("StackedConstantFactor: history must hold exactly p iterates");
  const Index n = C.cols();
  std::vector<Vector> pos{}, neg{};
  Index np = C.rows(), nn = 0;
  for (int i = 0; i < coeffs.p; ++i)
    for (Index j = 0; j < history[i]->rank(); ++j)
      (coeffs.alpha[i] * history[i]->signature(j) > 0 ? np : nn) += 1;
  StackedConstantFactor f;
  f.positive.resize(n, np);
  f.negative.resize(n, nn);
  f.positive.leftCols(C.rows()) = std::sqrt(hb) * C.transpose();
  Index ip = C.rows(), in = 0;
  for (int i = 0; i < coeffs.p; ++i) {
    const SignedLowRankFactor& X = *history[i];
    if (X.n() != n) throw DimensionMismatch("StackedConstantFactor: history factor has wrong row count");
    for (Index j = 0; j < X.rank(); ++j) {
      const double w = coeffs.alpha[i] * X.signature(j);
      if (w > 0)
        f.positive.col(ip++) = std::sqrt(w) * X.Z.col(j);
      else
        f.negative.col(in++) = std::sqrt(-w) * X.Z.col(j);
    }
  }
  return f;
}

Matrix StackedConstantFactor::dense() const {
  return positive * positive.transpose() - negative * negative.transpose();
}

ClosedLoopTransposed::ClosedLoopTransposed(const LinearOperator& S, const Matrix& curlyB,
                                           const SignedLowRankFactor& X)
    : S_(S) {
  if (curlyB.rows() != S.rows() || X.n() != S.rows())
    throw DimensionMismatch("ClosedLoopTransposed: inconsistent shapes");
  low_rank_ = X.rank() > 0 && curlyB.cols() > 0;
  if (!low_rank_) return;
  U_ = X.Z * (X.signature.asDiagonal() * (X.Z.transpose() * curlyB));
  W_ = curlyB;
  SinvU_ = S_.solve_t(U_);
  const Index l = W_.cols();
  capacitance_.compute(Matrix::Identity(l, l) - W_.transpose() * SinvU_);
}

Matrix ClosedLoopTransposed::apply(const Matrix& V) const {
  Matrix out = S_.apply_t(V);
  if (low_rank_) out.noalias() -= U_ * (W_.transpose() * V);
  return out;
}

Matrix ClosedLoopTransposed::solve(const Matrix& V) const {
  Matrix y = S_.solve_t(V);
  if (low_rank_) y.noalias() += SinvU_ * capacitance_.solve(Matrix(W_.transpose() * y));
  return y;
}

LyapunovFactorResult eba_lyapunov(const KrylovOperator& M, const Matrix& G, const LyapunovOptions& options) {
  const Index n = M.rows();
  if (G.rows() != n) throw DimensionMismatch("eba_lyapunov: G has wrong row count");
  LyapunovFactorResult res;
  const double gnorm = (G.transpose() * G).norm();  // ||G G^T||_F
  if (G.cols() == 0 || gnorm == 0.0) {
    res.Z = Matrix::Zero(n, 0);
    res.invariant = true;
    return res;
  }

  Matrix V(n, 0), MV(n, 0);
  // Orthogonalizes W against V, deflates dependent columns, appends the rest.
  auto append = [&](Matrix W) -> std::pair<Index, Index> {
    const Index first = V.cols();
    const double scale = W.norm();
    if (W.cols() == 0 || scale == 0.0 || first == n) return {first, 0};
    for (int pass = 0; pass < 2; ++pass) W.noalias() -= V * (V.transpose() * W);
    Eigen::ColPivHouseholderQR<Matrix> qr(W);
    const Index kmax = std::min(W.cols(), n - first);
    Index r = 0;
    while (r < kmax && std::abs(qr.matrixQR()(r, r)) > kDeflationTol * scale) ++r;
    if (r == 0) return {first, 0};
    Matrix Q = qr.householderQ() * Matrix::Identity(n, r);
    Q.noalias() -= V * (V.transpose() * Q);
    Q = Eigen::HouseholderQR<Matrix>(Q).householderQ() * Matrix::Identity(n, r);
    V.conservativeResize(n, first + r);
    V.rightCols(r) = Q;
    MV.conservativeResize(n, first + r);
    MV.rightCols(r) = M.apply(Q);
    return {first, r};
  };

  auto pos = append(G);
  auto inv = append(M.solve(G));
  Index last_begin = 0;
  bool grew = true;
  for (int it = 0;; ++it) {
    const Index k = V.cols();
    const Matrix T = V.transpose() * MV;
    const Matrix Gm = V.transpose() * G;
    Matrix Y;
    try {
      Y = solve_lyapunov(T.transpose(), Gm * Gm.transpose());
    } catch (const SpectrumIncompatible& e) {
      throw UnstableClosedLoop(std::string("eba_lyapunov: projected operator is not stable: ") + e.what());
    }
    Y = symmetrized(Y);
    // Columns added in the last expansion carry the coupling to the next block.
    const Index w = k - last_begin;
    Matrix L = MV.rightCols(w) - V * T.rightCols(w);
    const double r = std::sqrt(2.0) * (L * Y.bottomRows(w)).norm() / gnorm;
    res.residual = grew ? r : 0.0;
    res.iterations = it;
    res.basis_size = k;
    res.invariant = !grew || k == n;
    if (res.residual <= options.tol || res.invariant) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(Y);
      const Vector& lam = es.eigenvalues();
      const double lmax = lam.cwiseAbs().maxCoeff();
      if (lam.minCoeff() < -1e-8 * lmax)
        throw UnstableClosedLoop("eba_lyapunov: projected solution is indefinite");
      Index keep = 0;
      for (Index i = 0; i < lam.size(); ++i) keep += lam(i) > options.dtol * lmax;
      Matrix U(k, keep);
      Vector s(keep);
      for (Index i = lam.size() - 1, j = 0; i >= 0 && j < keep; --i)
        if (lam(i) > options.dtol * lmax) {
          U.col(j) = es.eigenvectors().col(i);
          s(j++) = std::sqrt(lam(i));
        }
      res.Z = V * (U * s.asDiagonal());
      return res;
    }
    if (it == options.m_max)
      throw NotConverged("eba_lyapunov: residual " + std::to_string(res.residual) + " after " +
                         std::to_string(it) + " expansions");

    last_begin = k;
    const Matrix next_pos = MV.middleCols(pos.first, pos.second);
    const Matrix next_inv = inv.second ? M.solve(V.middleCols(inv.first, inv.second)) : Matrix(n, 0);
    pos = append(next_pos);
    inv = append(next_inv);
    grew = pos.second + inv.second > 0;
  }
}

LargeCareStep make_large_care_step(const LinearOperator& shifted, const Matrix& B, const Matrix& C,
                                   const std::vector<const SignedLowRankFactor*>& history, double h,
                                   const BDFCoefficients& coeffs) {
  const double hb = h * coeffs.beta;
  return {shifted, std::sqrt(hb) * B, StackedConstantFactor::build(C, hb, history, coeffs)};
}

double large_care_residual(const LargeCareStep& step, const SignedLowRankFactor& X) {
  const Index n = step.curlyA.rows();
  const Matrix& P = step.constant.positive;
  const Matrix& N = step.constant.negative;
  const Matrix AtZ = X.rank() ? step.curlyA.apply_t(X.Z) : Matrix(n, 0);
  const Index r = X.rank(), np = P.cols(), nn = N.cols();
  const Matrix S = X.signature.asDiagonal();
  const Matrix W = X.Z * (S * (X.Z.transpose() * step.curlyB));  // X curlyB

  // R = U K U^T with U = [A^T Z, Z, P, N].
  Matrix U(n, 2 * r + np + nn);
  U << AtZ, X.Z, P, N;
  Matrix K = Matrix::Zero(U.cols(), U.cols());
  K.block(0, r, r, r) = S;
  K.block(r, 0, r, r) = S;
  const Matrix ZtB = X.Z.transpose() * step.curlyB;
  K.block(r, r, r, r) = -S * ZtB * ZtB.transpose() * S;
  K.block(2 * r, 2 * r, np, np).setIdentity();
  K.block(2 * r + np, 2 * r + np, nn, nn) = -Matrix::Identity(nn, nn);
  double rn = 0.0;
  if (U.cols() > 0) {
    Eigen::HouseholderQR<Matrix> qr(U);
    const Index q = std::min(n, U.cols());
    const Matrix R = qr.matrixQR().topRows(q).triangularView<Eigen::Upper>();
    rn = (R * K * R.transpose()).norm();
  }

  Vector pn(np + nn);
  pn << Vector::Ones(np), -Vector::Ones(nn);
  const double atx = r ? std::sqrt(std::max(0.0, ((S * AtZ.transpose() * AtZ * S) * (X.Z.transpose() * X.Z)).trace())) : 0.0;
  const double quad = (W.transpose() * W).norm();
  const double q = gram_norm(hcat(P, N), pn);
  const double den = 2.0 * atx + quad + q;
  return den > 0 ? rn / den : rn;
}

SignedLowRankFactor newton_step_large(const LargeCareStep& step, const SignedLowRankFactor& Xp,
                                      const LyapunovOptions& options, NewtonStepInfo* info) {
  const ClosedLoopTransposed M(step.curlyA, step.curlyB, Xp);
  const Matrix XB = Xp.Z * (Xp.signature.asDiagonal() * (Xp.Z.transpose() * step.curlyB));
  const Matrix G1 = hcat(XB, step.constant.positive);
  NewtonStepInfo local;
  NewtonStepInfo& out = info ? *info : local;
  out.L1 = eba_lyapunov(M, G1, options);
  SignedLowRankFactor X = SignedLowRankFactor::positive(out.L1.Z);
  out.L2 = LyapunovFactorResult{};
  if (step.constant.negative.cols() > 0) {
    out.L2 = eba_lyapunov(M, step.constant.negative, options);
    X = combine(1.0, X, -1.0, SignedLowRankFactor::positive(out.L2.Z));
  }
  return X.compressed(options.dtol);
}

BaselineSolution solve_baseline(const DREProblem& problem, const SolverConfig& config,
                                const BaselineOptions& options) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  config.validate(problem.T_f);
  const Index n = problem.n();
  if (problem.B.rows() != n || problem.C.cols() != n || (problem.Z0.size() && problem.Z0.rows() != n))
    throw DimensionMismatch("solve_baseline: B, C or Z0 does not conform with A");

  const LinearOperator op = LinearOperator::factorize(problem);
  std::map<int, LinearOperator> shifted;  // h beta A - I/2 per order
  auto shifted_for = [&](const BDFCoefficients& c) -> const LinearOperator& {
    auto it = shifted.find(c.p);
    if (it == shifted.end()) it = shifted.emplace(c.p, op.affine(config.h * c.beta, -0.5)).first;
    return it->second;
  };
  LyapunovOptions lyap = options.lyapunov;
  lyap.dtol = std::min(lyap.dtol, config.dtol);

  // Column compression after every update limits the attainable residual to about dtol.
  const double newton_tol = std::max(config.care_tol, 10.0 * config.dtol);

  const long steps = config.steps_for(problem.T_f);
  BaselineSolution sol;
  std::deque<SignedLowRankFactor> recent{
      SignedLowRankFactor::positive(problem.Z0.size() ? problem.Z0 : Matrix(n, 0)).compressed(config.dtol)};
  sol.times.push_back(0.0);
  sol.samples.push_back(recent.front());

  for (long k1 = 1; k1 <= steps; ++k1) {
    const int nominal = std::min<int>(config.p, static_cast<int>(recent.size()));
    int order = nominal;
    BaselineStepLog log;
    SignedLowRankFactor X;
    for (;;) {
      const BDFCoefficients coeffs = bdf_coefficients(order);
      std::vector<const SignedLowRankFactor*> hist;
      for (int i = 0; i < order; ++i) hist.push_back(&recent[i]);
      log = BaselineStepLog{};
      try {
        const LargeCareStep step =
            make_large_care_step(shifted_for(coeffs), problem.B, problem.C, hist, config.h, coeffs);
        X = recent.front();
        double res = large_care_residual(step, X);
        int it = 0;
        while (res > newton_tol) {
          if (it == options.newton_maxit || it == config.care_maxit)
            throw MaxIterations("baseline Newton: residual " + std::to_string(res) + " after " +
                                std::to_string(it) + " iterations");
          NewtonStepInfo info;
          try {
            X = newton_step_large(step, X, lyap, &info);
          } catch (const UnstableClosedLoop& e) {
            throw NoStabilizingGuess(e.what());
          }
          sol.lyapunov_solves += 1 + (info.L2.basis_size > 0);
          log.max_basis = std::max({log.max_basis, info.L1.basis_size, info.L2.basis_size});
          ++it;
          res = large_care_residual(step, X);
          if (!std::isfinite(res)) throw MaxIterations("baseline Newton: residual is not finite");
        }
        log.newton_iterations = it;
        log.care_residual = res;
        break;
      } catch (const StepFailure&) {
        throw;
      } catch (const Error& e) {
        const bool no_solution = dynamic_cast<const NoStabilizingGuess*>(&e) ||
                                 dynamic_cast<const MaxIterations*>(&e) ||
                                 dynamic_cast<const SpectrumIncompatible*>(&e);
        if (order > 1 && no_solution) {
          order = 1;
          continue;
        }
        throw StepFailure(k1, e);
      }
    }
    if (order < nominal) ++sol.reduced_steps;
    log.k = k1;
    log.t = k1 == steps ? problem.T_f : double(k1) * config.h;
    log.order = order;
    log.rank = X.rank();
    sol.log.push_back(log);

    recent.push_front(std::move(X));
    if (recent.size() > 3) recent.pop_back();
    if (k1 == steps || (options.sample_stride > 0 && k1 % options.sample_stride == 0)) {
      sol.times.push_back(log.t);
      sol.samples.push_back(recent.front());
    }
  }
  sol.X_final = recent.front();
  sol.Z = sol.X_final.psd_factor(config.dtol);
  sol.rank = sol.Z.cols();
  sol.seconds = std::chrono::duration<double>(clock::now() - t0).count();
  return sol;
}

void write_baseline_log(const std::string& path, const std::vector<BaselineStepLog>& log) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << "k,t,order,newton_iterations,care_residual,rank,max_basis\n" << std::setprecision(12);
  for (const auto& s : log)
    out << s.k << ',' << s.t << ',' << s.order << ',' << s.newton_iterations << ',' << s.care_residual << ','
        << s.rank << ',' << s.max_basis << '\n';
}

}  // namespace dre
