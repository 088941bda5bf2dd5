#include "dre/bdf.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>

#include "dre/errors.hpp"

namespace dre {

BDFCoefficients bdf_coefficients(int p) {
  switch (p) {
    case 1: return {1, 1.0, {1.0, 0.0, 0.0}};
    case 2: return {2, 2.0 / 3.0, {4.0 / 3.0, -1.0 / 3.0, 0.0}};
    case 3: return {3, 6.0 / 11.0, {18.0 / 11.0, -9.0 / 11.0, 2.0 / 11.0}};
    default: throw UnsupportedOrder("BDF order " + std::to_string(p) + " not in {1,2,3}");
  }
}

CareStepData assemble_care_step_arole(const Matrix& A, const Matrix& B, const Matrix& Q0,
                                      std::span<const Matrix> history, double h,
                                      const BDFCoefficients& coeffs) {
  if (static_cast<int>(history.size()) != coeffs.p)
    throw DimensionMismatch("assemble_care_step: history must hold exactly p iterates");
  const Index k = A.rows();
  const double hb = h * coeffs.beta;
  CareStepData d;
  d.curlyA = hb * A - 0.5 * Matrix::Identity(k, k);
  d.curlyB = std::sqrt(hb) * B;
  d.Qstep = hb * Q0;
  for (int i = 0; i < coeffs.p; ++i) d.Qstep.noalias() += coeffs.alpha[i] * history[i];
  d.Qstep = symmetrized(d.Qstep);
  return d;
}

CareStepData assemble_care_step(const Matrix& T, const Matrix& Bm, const Matrix& Cm,
                                std::span<const Matrix> history, double h,
                                const BDFCoefficients& coeffs) {
  return assemble_care_step_arole(T.transpose(), Bm, Cm.transpose() * Cm, history, h, coeffs);
}

StepResult bdf_step(const CareStepData& step, const Matrix& warm_start, const CareOptions& care) {
  CareResult r = solve_care(step.curlyA, step.curlyB, step.Qstep, warm_start, care);
  StepResult out;
  out.Y = std::move(r.X);
  out.log.newton_iterations = r.iterations;
  out.log.care_residual = r.residual;
  return out;
}

IntegrationOptions integration_options(const SolverConfig& config, long sample_stride) {
  IntegrationOptions o;
  o.p = config.p;
  o.h = config.h;
  o.care.tol = config.care_tol;
  o.care.maxit = config.care_maxit;
  o.sample_stride = sample_stride;
  return o;
}

namespace {

// Y + 0.1 ||Y||_F I admits a Cholesky factorization.
bool mostly_psd(const Matrix& Y) {
  if (Y.size() == 0) return true;
  const double tau = 0.1 * Y.norm();
  Matrix S = Y;
  S.diagonal().array() += tau;
  return Eigen::LLT<Matrix>(S).info() == Eigen::Success;
}

}  // namespace

ProjectedTrajectory integrate_arole(const Matrix& A, const Matrix& B, const Matrix& Q0,
                                    const Matrix& X0, double T_f, const IntegrationOptions& options) {
  const Index k = A.rows();
  if (A.cols() != k || B.rows() != k || Q0.rows() != k || X0.rows() != k || X0.cols() != k)
    throw DimensionMismatch("integrate: inconsistent shapes");
  bdf_coefficients(options.p);
  SolverConfig probe;
  probe.h = options.h;
  const long steps = probe.steps_for(T_f);

  ProjectedTrajectory traj;
  traj.h = options.h;
  traj.steps = steps;
  traj.times.push_back(0.0);
  traj.samples.push_back(symmetrized(X0));

  std::deque<Matrix> recent{symmetrized(X0)};  // most recent first
  if (options.observer) options.observer(0, 0.0, recent.front());
  for (long k1 = 1; k1 <= steps; ++k1) {
    int order = std::min<int>(options.p, static_cast<int>(recent.size()));
    StepResult step;
    BDFCoefficients coeffs;
    for (;;) {
      coeffs = bdf_coefficients(order);
      std::vector<Matrix> history(recent.begin(), recent.begin() + order);
      try {
        const CareStepData data = assemble_care_step_arole(A, B, Q0, history, options.h, coeffs);
        step = bdf_step(data, recent.front(), options.care);
        if (order > 1 && !mostly_psd(step.Y)) {
          order = 1;
          continue;
        }
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
    step.log.order = order;
    if (order < std::min<int>(options.p, static_cast<int>(recent.size()))) ++traj.reduced_steps;
    step.log.k = k1;
    step.log.t = double(k1) * options.h;
    if (options.keep_log) traj.log.push_back(step.log);
    traj.last_coefficients = coeffs;

    recent.push_front(std::move(step.Y));
    if (recent.size() > 4) recent.pop_back();

    const bool last = (k1 == steps);
    if (options.observer) options.observer(k1, last ? T_f : double(k1) * options.h, recent.front());
    if (last || (options.sample_stride > 0 && k1 % options.sample_stride == 0)) {
      traj.times.push_back(last ? T_f : double(k1) * options.h);
      traj.samples.push_back(recent.front());
    }
  }
  traj.final_history.assign(recent.begin(), recent.end());
  return traj;
}

ProjectedTrajectory integrate(const Matrix& T, const Matrix& Bm, const Matrix& Cm, const Matrix& Y0,
                              double T_f, const IntegrationOptions& options) {
  return integrate_arole(T.transpose(), Bm, Cm.transpose() * Cm, Y0, T_f, options);
}

void write_step_log(const std::string& path, const ProjectedTrajectory& trajectory) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << "k,t,order,newton_iterations,care_residual\n" << std::setprecision(12);
  for (const auto& s : trajectory.log)
    out << s.k << ',' << s.t << ',' << s.order << ',' << s.newton_iterations << ',' << s.care_residual << '\n';
}

}  // namespace dre
