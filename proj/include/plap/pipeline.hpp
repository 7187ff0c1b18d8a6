#pragma once

// End-to-end drivers behind the CLI subcommands.

#include "plap/config.hpp"
#include "plap/io.hpp"
#include "plap/minimax.hpp"
#include "plap/nonlinearity.hpp"
#include "plap/shooting.hpp"

#include <optional>
#include <string>
#include <vector>

namespace plap {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int validation = 1;
inline constexpr int solver = 2;
inline constexpr int certificate = 3;
}  // namespace exit_code

/// Everything that defines one truncated problem on one grid.
struct Problem {
  NonlinearitySpec<double> spec;
  TruncatedNonlinearity<double> f;
  ConeWindow<double> window;
  GridPtr<double> grid;
  int N;

  double p() const { return spec.p; }
  double m() const { return spec.m; }
  double u0() const { return spec.u0; }
  double s0() const { return f.s0(); }
};

/// g for the configured kind; `q` overrides cfg.q in the power case.
NonlinearitySpec<double> make_spec(const RunConfig& cfg, double q);

/// Truncates at `s0` (or at 2 max(M, u0) when empty) and builds the grid.
Problem make_problem(const RunConfig& cfg, double q, std::optional<double> s0);

InnerSolverConfig inner_config(const RunConfig& cfg);
DescentConfig descent_config(const RunConfig& cfg);
ShootConfig shoot_config(const RunConfig& cfg, const Problem& problem);

/// The default descent start u0 (1 + a v), v the zero-mean r^2, kept inside the window.
Vector<double> default_start(const Problem& problem);

struct Certificates {
  RayCheck<double> ray;
  CertificateReport<double> nonconstancy;
  std::optional<PhaseDiagnostics<double>> phase;  // pure power, on the shooting profile
  GeometrySample<double> geometry;
  double cross_oracle_sup = std::numeric_limits<double>::quiet_NaN();
  double cross_oracle_tol = 0;
  double fixed_point_sup = 0;
  double nehari_gap = 0;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

struct SolveOutcome {
  std::optional<Problem> problem;
  std::optional<SolveResult<double>> result;
  std::optional<ShootingSolution<double>> shooting;
  std::optional<Certificates> certificates;
  std::vector<DescentRecord> telemetry;
  double energy_u0 = 0;
  int s0_doublings = 0;
  int exit_code = exit_code::ok;
  std::string message;
};

/// Truncation, Nehari descent with a-posteriori check of sup u < s0 (doubling
/// s0 in adaptive mode), the shooting cross-check and the certificates.
SolveOutcome run_solve(const RunConfig& cfg, std::optional<double> q_override = std::nullopt,
                       bool with_certificates = true);

json solve_json(const SolveOutcome& outcome, const RunConfig& cfg);

struct SweepRow {
  double q = 0;
  double c_q = 0;
  double sup_dist_G = 0;
  double w1p_dist_G = 0;
  double h_q_G = 0;
  double u_at_0 = 0;
  double u_at_1 = 0;
  double cross_oracle_sup = std::numeric_limits<double>::quiet_NaN();
  std::string status;
  bool converged = false;
  std::string error;
};

struct SweepResult {
  double p = 0;
  int N = 1;
  int n_cells = 0;
  double c_inf = 0;
  double G_center = 0;
  std::vector<SweepRow> rows;
  bool all_converged = false;
  bool gap_decreasing = false;
  int exit_code = exit_code::ok;
  std::vector<std::string> messages;
};

/// One row per q: solve, then compare with the limit profile G.
SweepResult run_sweep(const RunConfig& cfg);

std::string sweep_csv(const SweepResult& sweep);
json sweep_json(const SweepResult& sweep);

struct LimitOutcome {
  LimitProfile<double> profile;
  double p = 0;
  int N = 1;
};

LimitOutcome run_limit(const RunConfig& cfg);
json limit_json(const LimitOutcome& limit);

struct InvariantResult {
  std::string name;
  std::string status;  // pass | fail | skip
  std::string detail;
};

struct VerifyReport {
  std::vector<InvariantResult> results;
  bool ok() const;
  std::vector<std::string> failing() const;
};

/// The invariant battery of every module on the configured problem.
VerifyReport run_verify(const RunConfig& cfg);
json verify_json(const VerifyReport& report);

}  // namespace plap
