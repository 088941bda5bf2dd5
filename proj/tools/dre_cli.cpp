// dre: command line driver for the projected and baseline DRE solvers.
#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "dre/baseline.hpp"
#include "dre/benchmarks.hpp"
#include "dre/eba_bdf.hpp"
#include "dre/errors.hpp"
#include "dre/lqr.hpp"
#include "dre/matrix_market.hpp"
#include "dre/oracle.hpp"
#include "dre/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace dre;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Common {
  BenchmarkSpec spec;
  std::string family = "convdiff2d";
  SolverConfig config;
  std::string config_path;
  std::string out = "out";
};

struct Run {
  std::string command;
  json manifest;
  std::vector<std::string> outputs;

  void add_output(const fs::path& p) { outputs.push_back(p.filename().string()); }
};

void add_problem_options(CLI::App* app, Common& c) {
  app->set_help_flag("--help", "Print this help message and exit");
  app->add_option("--family", c.family, "convdiff2d | heat1d_fem | matrixmarket")->capture_default_str();
  app->add_option("--n0", c.spec.n0, "convdiff2d grid size (n = n0^2)")->capture_default_str();
  app->add_option("--n", c.spec.n, "heat1d_fem order")->capture_default_str();
  app->add_option("--s", c.spec.s, "outputs (rows of C)")->capture_default_str();
  app->add_option("--l", c.spec.l, "inputs (columns of B); heat1d_fem uses l = s")->capture_default_str();
  app->add_option("--seed", c.spec.seed, "random seed")->capture_default_str();
  app->add_option("--alpha", c.spec.alpha, "heat1d_fem diffusion")->capture_default_str();
  app->add_option("--dt", c.spec.dt, "heat1d_fem time discretization step")->capture_default_str();
  app->add_option("--tf", c.spec.T_f, "final time")->capture_default_str();
  app->add_option("--A", c.spec.path_A, "Matrix Market file for A");
  app->add_option("--B", c.spec.path_B, "Matrix Market file for B");
  app->add_option("--C", c.spec.path_C, "Matrix Market file for C");
  app->add_option("--Z0", c.spec.path_Z0, "Matrix Market file for Z0");
  app->add_option("--E", c.spec.path_E, "Matrix Market file for the mass matrix");

  app->add_option("--config", c.config_path, "key = value solver configuration file");
  app->add_option("--p", c.config.p, "BDF order")->capture_default_str();
  app->add_option("--h", c.config.h, "time step")->capture_default_str();
  app->add_option("--tol", c.config.tol, "residual tolerance")->capture_default_str();
  app->add_option("--m-max", c.config.m_max, "maximum Arnoldi iterations")->capture_default_str();
  app->add_option("--dtol", c.config.dtol, "truncation tolerance")->capture_default_str();
  app->add_option("--check-stride", c.config.check_stride, "residual test stride")->capture_default_str();
  app->add_option("--care-tol", c.config.care_tol, "inner CARE tolerance")->capture_default_str();
  app->add_option("--care-maxit", c.config.care_maxit, "inner CARE iteration limit")->capture_default_str();
  app->add_option("--out", c.out, "output directory")->capture_default_str();
}

// Options given on the command line take precedence over the config file.
SolverConfig effective_config(const Common& c, const CLI::App* app) {
  if (c.config_path.empty()) return c.config;
  SolverConfig cfg = load_config(c.config_path);
  auto given = [&](const char* name) { return app->count(name) > 0; };
  if (given("--p")) cfg.p = c.config.p;
  if (given("--h")) cfg.h = c.config.h;
  if (given("--tol")) cfg.tol = c.config.tol;
  if (given("--m-max")) cfg.m_max = c.config.m_max;
  if (given("--dtol")) cfg.dtol = c.config.dtol;
  if (given("--check-stride")) cfg.check_stride = c.config.check_stride;
  if (given("--care-tol")) cfg.care_tol = c.config.care_tol;
  if (given("--care-maxit")) cfg.care_maxit = c.config.care_maxit;
  return cfg;
}

json config_json(const SolverConfig& c) {
  return {{"p", c.p},         {"h", c.h},
          {"tol", c.tol},     {"m_max", c.m_max},
          {"dtol", c.dtol},   {"check_stride", c.check_stride},
          {"care_tol", c.care_tol}, {"care_maxit", c.care_maxit}};
}

json problem_json(const BenchmarkSpec& s, const DREProblem& p) {
  json j{{"family", to_string(s.family)}, {"name", p.name},     {"n", p.n()},
         {"inputs", p.inputs()},          {"outputs", p.outputs()}, {"T_f", p.T_f},
         {"seed", s.seed},                {"descriptor", p.E.has_value()}};
  if (s.family == Family::convdiff2d) j["n0"] = s.n0;
  if (s.family == Family::heat1d_fem) {
    j["alpha"] = s.alpha;
    j["dt"] = s.dt;
  }
  if (s.family == Family::matrixmarket) j["files"] = {s.path_A, s.path_B, s.path_C, s.path_Z0, s.path_E};
  return j;
}

json versions_json() {
  std::ostringstream eigen;
  eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  return {{"dre", kVersion}, {"eigen", eigen.str()}, {"compiler", __VERSION__}, {"cxx", __cplusplus}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << std::setw(2) << j << '\n';
}

void write_factor(const fs::path& path, const Matrix& Z) { write_matrix_market(path.string(), Z); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct MethodResult {
  Matrix Z;  // X ~ Z Z^T
  double seconds = 0.0;
  json summary;
};

MethodResult run_eba(const DREProblem& p, const SolverConfig& cfg, const fs::path& dir, Run& run) {
  const auto t0 = std::chrono::steady_clock::now();
  const LowRankSolution s = solve(p, cfg);
  MethodResult r;
  r.seconds = seconds_since(t0);
  r.Z = s.Z;
  const fs::path csv = dir / "convergence.csv";
  write_convergence_csv(csv.string(), s.trace);
  run.add_output(csv);
  r.summary = {{"m", s.m},         {"residual", s.residual.value}, {"rank", s.rank},
               {"converged", s.converged}, {"breakdown", s.breakdown}, {"seconds", r.seconds},
               {"reduced_steps", s.trajectory.reduced_steps}};
  return r;
}

MethodResult run_baseline(const DREProblem& p, const SolverConfig& cfg, const fs::path& dir, Run& run) {
  const BaselineSolution s = solve_baseline(p, cfg);
  MethodResult r;
  r.seconds = s.seconds;
  r.Z = s.Z;
  const fs::path csv = dir / "baseline_log.csv";
  write_baseline_log(csv.string(), s.log);
  run.add_output(csv);
  Index max_basis = 0;
  for (const auto& row : s.log) max_basis = std::max(max_basis, row.max_basis);
  r.summary = {{"rank", s.rank},
               {"reduced_steps", s.reduced_steps},
               {"lyapunov_solves", s.lyapunov_solves},
               {"max_basis", max_basis},
               {"seconds", r.seconds}};
  return r;
}

MethodResult run_reference(const DREProblem& p, const SolverConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const Matrix X = dense_reference_integrate(p, cfg.h, {p.T_f}).front();
  MethodResult r;
  r.seconds = seconds_since(t0);
  const TruncatedFactor tf = truncate_svd(X, 1e-14);
  for (Index i = 0; i < tf.rank(); ++i)
    if (tf.sign(i) < 0) throw IndefiniteY("reference: X(T_f) has a negative eigenvalue");
  r.Z = tf.U * tf.sigma.cwiseSqrt().asDiagonal();
  r.summary = {{"h_ref", cfg.h}, {"seconds", r.seconds}, {"norm", X.norm()}};
  return r;
}

Vector initial_state(Index n, std::uint64_t seed) { return Rng(seed, 7).uniform(n, 1); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank solvers for large differential Riccati equations"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common c;
  std::vector<std::string> methods{"eba", "baseline", "reference"};
  std::uint64_t x0_seed = 1;
  double h_sim = 0.0;
  long sample_stride = 10;

  CLI::App* solve_cmd = app.add_subcommand("solve", "projected BDF solver");
  CLI::App* baseline_cmd = app.add_subcommand("baseline", "BDF with low-rank Newton steps on the full equation");
  CLI::App* reference_cmd = app.add_subcommand("reference", "dense BDF reference (n <= 200)");
  CLI::App* compare_cmd = app.add_subcommand("compare", "run several methods and report difference norms");
  CLI::App* convergence_cmd = app.add_subcommand("convergence", "residual against Arnoldi iterations");
  CLI::App* lqr_cmd = app.add_subcommand("lqr", "optimal cost and feedback gain export");
  for (CLI::App* sub : {solve_cmd, baseline_cmd, reference_cmd, compare_cmd, convergence_cmd, lqr_cmd})
    add_problem_options(sub, c);
  compare_cmd->add_option("--methods", methods, "subset of eba,baseline,reference")->delimiter(',');
  lqr_cmd->add_option("--x0-seed", x0_seed, "seed of the initial state")->capture_default_str();
  lqr_cmd->add_option("--simulate", h_sim, "closed-loop simulation step (0 disables)")->capture_default_str();
  lqr_cmd->add_option("--sample-stride", sample_stride, "trajectory sampling for the gain schedule")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  CLI::App* sub = app.get_subcommands().front();

  Run run;
  run.command = sub->get_name();
  fs::path dir = c.out;
  json& m = run.manifest;
  m["command"] = run.command;
  m["argv"] = std::vector<std::string>(argv, argv + argc);
  m["versions"] = versions_json();

  try {
    fs::create_directories(dir);
    c.spec.family = family_from_string(c.family);
    const SolverConfig cfg = effective_config(c, sub);
    m["config"] = config_json(cfg);
    const DREProblem p = generate(c.spec);
    m["problem"] = problem_json(c.spec, p);
    cfg.validate(p.T_f);

    if (sub == solve_cmd) {
      MethodResult r = run_eba(p, cfg, dir, run);
      write_factor(dir / "factor.mtx", r.Z);
      run.add_output(dir / "factor.mtx");
      m["result"] = r.summary;
    } else if (sub == baseline_cmd) {
      MethodResult r = run_baseline(p, cfg, dir, run);
      write_factor(dir / "factor.mtx", r.Z);
      run.add_output(dir / "factor.mtx");
      m["result"] = r.summary;
    } else if (sub == reference_cmd) {
      MethodResult r = run_reference(p, cfg);
      write_factor(dir / "factor.mtx", r.Z);
      run.add_output(dir / "factor.mtx");
      m["result"] = r.summary;
    } else if (sub == compare_cmd) {
      std::map<std::string, MethodResult> results;
      for (const std::string& name : methods) {
        if (name == "eba")
          results[name] = run_eba(p, cfg, dir, run);
        else if (name == "baseline")
          results[name] = run_baseline(p, cfg, dir, run);
        else if (name == "reference")
          results[name] = run_reference(p, cfg);
        else
          throw InvalidConfig("compare: unknown method '" + name + "'");
        m["result"][name] = results[name].summary;
      }
      const fs::path csv = dir / "compare.csv";
      std::ofstream out(csv);
      out << "method_a,method_b,abs_difference,rel_difference\n" << std::setprecision(12);
      for (auto a = results.begin(); a != results.end(); ++a)
        for (auto b = std::next(a); b != results.end(); ++b) {
          const double d = difference_norm(a->second.Z, b->second.Z);
          const double scale = std::max(factor_norm(a->second.Z), factor_norm(b->second.Z));
          const double r = scale > 0 ? d / scale : d;
          out << a->first << ',' << b->first << ',' << d << ',' << r << '\n';
          m["result"]["differences"].push_back({{"a", a->first}, {"b", b->first}, {"abs", d}, {"rel", r}});
        }
      run.add_output(csv);
    } else if (sub == convergence_cmd) {
      SolveOptions opt;
      opt.require_convergence = false;
      const LowRankSolution s = solve(p, cfg, opt);
      const fs::path csv = dir / "convergence.csv";
      write_convergence_csv(csv.string(), s.trace);
      run.add_output(csv);
      m["result"] = {{"m", s.m}, {"residual", s.residual.value}, {"converged", s.converged}};
    } else if (sub == lqr_cmd) {
      SolveOptions opt;
      opt.sample_stride = sample_stride;
      const LowRankSolution s = solve(p, cfg, opt);
      const Vector x0 = initial_state(p.n(), x0_seed);
      const CostReport cost = optimal_cost(s, x0);
      const CostIdentity id = projected_cost_identity_check(s, x0);
      const GainSchedule g = gain_schedule(s, p.T_f);
      const fs::path csv = dir / "gain_schedule.csv";
      write_gain_schedule_csv(csv.string(), g);
      run.add_output(csv);
      m["result"] = {{"J", cost.J},
                     {"x0_seed", x0_seed},
                     {"identity_reduced", id.reduced},
                     {"identity_full", id.full},
                     {"identity_discrepancy", id.discrepancy},
                     {"m", s.m},
                     {"residual", s.residual.value}};
      if (h_sim > 0) {
        const ClosedLoopRun cl = simulate_closed_loop(p, g, x0, h_sim);
        m["result"]["simulation"] = {{"h_sim", h_sim},
                                     {"realized_cost", cl.realized_cost},
                                     {"running_cost", cl.running_cost},
                                     {"terminal_cost", cl.terminal_cost},
                                     {"relative_gap", std::abs(cl.realized_cost - cost.J) / cost.J}};
      }
    }
    m["status"] = "ok";
    m["outputs"] = run.outputs;
    write_json(dir / "manifest.json", m);
    std::cout << m["result"].dump() << '\n';
    return 0;
  } catch (const Error& e) {
    json err{{"status", "error"}, {"code", e.code()}, {"message", e.what()}, {"command", run.command}};
    m["status"] = "error";
    m["error"] = err;
    try {
      fs::create_directories(dir);
      write_json(dir / "manifest.json", m);
    } catch (...) {
    }
    std::cerr << err.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    json err{{"status", "error"}, {"code", "InternalError"}, {"message", e.what()}, {"command", run.command}};
    std::cerr << err.dump() << '\n';
    return 3;
  }
}
