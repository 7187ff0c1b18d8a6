#include "plap/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <future>

namespace plap {

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<double> to_std(const Vector<double>& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

NonlinearitySpec<double> make_spec(const RunConfig& cfg, double q) {
  if (cfg.kind == "power") return power_law(cfg.p, q);
  auto cols = read_table_csv(cfg.table);
  const double s_max = cols.s.empty() ? 0 : cols.s.back();
  auto g = table_source(std::move(cols.s), std::move(cols.g), std::move(cols.dg));
  return shift(std::move(g), cfg.p, s_max);
}

Problem make_problem(const RunConfig& cfg, double q, std::optional<double> s0) {
  auto spec = make_spec(cfg, q);
  TruncationParams<double> params;
  if (s0) {
    params.bounds = a_priori_constants(spec, cfg.N, std::nullopt, *s0);
    params.s0 = *s0;
  } else {
    params.bounds = a_priori_constants(spec, cfg.N);
    params.s0 = 2 * std::max(params.bounds.M, spec.u0);
  }
  params.ell = cfg.ell ? *cfg.ell : default_ell(spec, cfg.N);
  params.policy = BoundPolicy::a_posteriori;
  auto f = truncate(spec, cfg.N, params);
  const auto window = cone_window(f, spec.m, spec.p, spec.u0);
  return Problem{spec, std::move(f), window, build_grid(cfg.N, cfg.n_cells), cfg.N};
}

InnerSolverConfig inner_config(const RunConfig& cfg) {
  InnerSolverConfig inner;
  inner.eps_reg = cfg.eps_reg;
  inner.eps_min = cfg.eps_min;
  return inner;
}

DescentConfig descent_config(const RunConfig& cfg) {
  DescentConfig d;
  d.tol = cfg.tol;
  d.max_iter = cfg.max_iter;
  d.polish_threshold = cfg.polish_threshold;
  return d;
}

ShootConfig shoot_config(const RunConfig& cfg, const Problem& problem) {
  ShootConfig s;
  s.rtol = cfg.rtol;
  s.blowup = 10 * problem.s0();
  return s;
}

Vector<double> default_start(const Problem& problem) {
  const Vector<double> v = centered_square(*problem.grid);
  const double u0 = problem.u0();
  double amp = 0.3 * u0;
  const double room_below = u0 - problem.window.lower, room_above = problem.window.upper - u0;
  amp = std::min(amp, 0.5 * room_below / -v.minCoeff());
  if (std::isfinite(room_above)) amp = std::min(amp, 0.5 * room_above / v.maxCoeff());
  return (u0 + amp * v.array()).matrix();
}

namespace {

Certificates certify(const Problem& pb, const RunConfig& cfg, const SolveResult<double>& res,
                     std::optional<ShootingSolution<double>>& shooting) {
  Certificates c;
  const auto& grid = *pb.grid;
  const Vector<double>& u = res.u.values;
  const double p = pb.p(), m = pb.m(), u0 = pb.u0();

  if (!is_in_cone(u, 1e-12) || u.minCoeff() < pb.window.lower || u.maxCoeff() > pb.window.upper)
    c.failures.push_back("cone");

  c.ray = ray_max_check(grid, u, pb.f, m, p);
  if (!c.ray.ok) c.failures.push_back("ray_max");

  try {
    c.nonconstancy = nonconstancy_certificate(grid, pb.f, m, p, u0, centered_square(grid), {0.02, 0.05, 0.1},
                                              pb.s0());
    if (!c.nonconstancy.sign_ok) c.failures.push_back("nonconstancy_sign");
  } catch (const std::exception&) {
    c.failures.push_back("nonconstancy_sign");
  }

  const Vector<double> t = tilde_T(grid, u, pb.f, m, p, inner_config(cfg));
  c.fixed_point_sup = (u - t).cwiseAbs().maxCoeff();
  if (!(c.fixed_point_sup <= 1e-6)) c.failures.push_back("fixed_point");

  const double norm = radial_norm_p(grid, u, m, p);
  c.nehari_gap = residual(grid, u, pb.f, m, p).dot(u) / grid.angular_factor() / norm;
  if (!(std::abs(c.nehari_gap) <= 1e-8)) c.failures.push_back("nehari_membership");

  const double below = u0 - pb.window.lower, above = pb.window.upper - u0;
  const double tau = 0.5 * std::min(below, above);
  c.geometry = mp_geometry_sample(grid, pb.f, m, p, pb.window.lower, tau, 200, cfg.seed);
  if (!(c.geometry.min_gap > 0)) c.failures.push_back("mp_geometry");

  c.cross_oracle_tol = 0.2 / cfg.n_cells;
  try {
    const double span = u0 - pb.window.lower;
    shooting = find_nonconstant(p, pb.N, pb.f, m, pb.window.lower + 1e-3 * span, u0 - 1e-6 * span, pb.grid,
                                shoot_config(cfg, pb));
    c.cross_oracle_sup = (shooting->u.values - u).cwiseAbs().maxCoeff();
    if (!(c.cross_oracle_sup <= c.cross_oracle_tol)) c.failures.push_back("cross_oracle");
    if (pb.spec.kind == SourceKind::power) {
      c.phase = phase_diagnostics(shooting->shot.values, shooting->shot.slopes, p, pb.spec.q);
      if (!c.phase->ok()) c.failures.push_back("phase_plane");
    }
  } catch (const std::exception&) {
    c.failures.push_back("cross_oracle");
  }
  return c;
}

}  // namespace

SolveOutcome run_solve(const RunConfig& cfg, std::optional<double> q_override, bool with_certificates) {
  SolveOutcome out;
  const double q = q_override ? *q_override : cfg.q;
  std::optional<double> s0 = cfg.s0;
  try {
    for (;;) {
      try {
        out.problem.emplace(make_problem(cfg, q, s0));
      } catch (const std::invalid_argument& e) {
        out.exit_code = exit_code::validation;
        out.message = e.what();
        return out;
      }
      const Problem& pb = *out.problem;
      out.telemetry.clear();
      const RadialFunction<double> start(pb.grid, default_start(pb), true);
      Window<double> window{pb.window.lower, pb.window.upper};
      out.result = nehari_descent(start, pb.f, pb.m(), pb.p(), pb.u0(), window, descent_config(cfg),
                                  [&](const DescentRecord& r) { out.telemetry.push_back(r); });
      out.energy_u0 = energy(*pb.grid, Vector<double>::Constant(pb.grid->n_nodes(), pb.u0()).eval(), pb.f,
                             pb.m(), pb.p());
      if (out.result->status != DescentStatus::converged) {
        out.exit_code = exit_code::solver;
        out.message = out.result->status == DescentStatus::converged_to_constant
                          ? "descent converged to the constant solution u0; no nonconstant solution found"
                          : "descent hit the iteration limit";
        return out;
      }
      if (out.result->u.values.maxCoeff() < pb.s0()) break;
      if (cfg.s0) {
        out.exit_code = exit_code::solver;
        out.message = "solution reaches s0; the truncation is not inactive";
        return out;
      }
      if (++out.s0_doublings > 8) {
        out.exit_code = exit_code::solver;
        out.message = "a-posteriori bound check kept failing after doubling s0";
        return out;
      }
      s0 = 2 * pb.s0();
    }
  } catch (const std::exception& e) {
    out.exit_code = exit_code::solver;
    out.message = e.what();
    return out;
  }

  if (with_certificates) {
    try {
      out.certificates = certify(*out.problem, cfg, *out.result, out.shooting);
    } catch (const std::exception& e) {
      out.exit_code = exit_code::solver;
      out.message = std::string("certificate evaluation failed: ") + e.what();
      return out;
    }
    if (!out.certificates->ok()) {
      out.exit_code = exit_code::certificate;
      out.message = "certificate failure:";
      for (const auto& f : out.certificates->failures) out.message += " " + f;
    }
  }
  return out;
}

json solve_json(const SolveOutcome& o, const RunConfig& cfg) {
  json j;
  j["p"] = cfg.p;
  j["q"] = o.problem && o.problem->spec.kind == SourceKind::power ? json(o.problem->spec.q) : json(nullptr);
  j["N"] = cfg.N;
  j["n_cells"] = cfg.n_cells;
  j["exit_code"] = o.exit_code;
  j["message"] = o.message;
  if (o.problem) {
    const auto& pb = *o.problem;
    j["m"] = pb.m();
    j["u0"] = pb.u0();
    j["s0"] = pb.s0();
    j["ell"] = pb.f.ell();
    j["s0_doublings"] = o.s0_doublings;
    j["window"] = {{"lower", pb.window.lower}, {"upper", finite_or_null(pb.window.upper)}};
  }
  j["energy_u0"] = o.energy_u0;
  if (o.result) {
    j["status"] = to_string(o.result->status);
    j["c"] = o.result->level;
    j["residual"] = o.result->residual;
    j["residual_tolerance"] = o.result->tolerance;
    j["iterations"] = o.result->iterations;
    j["u_values"] = to_std(o.result->u.values);
  } else {
    j["status"] = "failed";
    j["c"] = nullptr;
    j["residual"] = nullptr;
    j["u_values"] = json::array();
  }
  json cj = json::object();
  if (o.certificates) {
    const auto& c = *o.certificates;
    cj["ok"] = c.ok();
    cj["failures"] = c.failures;
    cj["ray_max"] = {{"ok", c.ray.ok}, {"argmax_t", c.ray.argmax_t}, {"min_energy_up_to_one", c.ray.min_energy_up_to_one}};
    json entries = json::array();
    for (const auto& e : c.nonconstancy.entries) entries.push_back({{"s", e.s}, {"h", e.h}, {"gap", e.gap}});
    cj["nonconstancy"] = {{"expected_sign", c.nonconstancy.expected_sign}, {"sign_ok", c.nonconstancy.sign_ok},
                          {"entries", entries}};
    cj["fixed_point_sup"] = c.fixed_point_sup;
    cj["nehari_gap"] = c.nehari_gap;
    cj["mp_geometry"] = {{"min_gap", c.geometry.min_gap}, {"constant_gap", c.geometry.constant_gap},
                         {"samples", c.geometry.samples}};
    cj["cross_oracle"] = {{"sup_diff", finite_or_null(c.cross_oracle_sup)}, {"tol", c.cross_oracle_tol}};
    if (o.shooting) cj["cross_oracle"]["center"] = o.shooting->shot.a;
    if (c.phase) {
      cj["phase_plane"] = {{"L_increases", c.phase->L_increases},
                           {"sigma_violations", c.phase->sigma_violations},
                           {"sup", c.phase->sup_value},
                           {"sup_bound", c.phase->sup_bound},
                           {"max_slope", c.phase->max_slope},
                           {"slope_bound", c.phase->slope_bound}};
    }
  }
  j["certificates"] = cj;
  return j;
}

SweepResult run_sweep(const RunConfig& cfg) {
  if (!(cfg.p >= 2)) throw ConfigError("sweep needs p >= 2 (the limit profile is defined there)");
  SweepResult out;
  out.p = cfg.p;
  out.N = cfg.N;
  out.n_cells = cfg.n_cells;
  auto grid = build_grid(cfg.N, cfg.n_cells);
  ShootConfig sc;
  sc.rtol = cfg.rtol;
  const auto G = solve_G(cfg.p, cfg.N, grid, sc);
  out.c_inf = G.c_inf;
  out.G_center = G.center;

  auto row_for = [&](double q) {
    SweepRow row;
    row.q = q;
    RunConfig local = cfg;
    local.command = "solve";
    local.q = q;
    const SolveOutcome o = run_solve(local, q, false);
    row.status = o.result ? to_string(o.result->status) : "failed";
    row.error = o.message;
    if (!o.result || !o.problem) return row;
    const Problem& pb = *o.problem;
    const Vector<double>& u = o.result->u.values;
    row.c_q = o.result->level;
    row.sup_dist_G = (u - G.G.values).cwiseAbs().maxCoeff();
    row.w1p_dist_G = w1p_norm(*grid, (u - G.G.values).eval(), cfg.p, pb.m());
    row.h_q_G = nehari_h(*grid, G.G.values, pb.f, pb.m(), pb.p());
    row.u_at_0 = u[0];
    row.u_at_1 = u[u.size() - 1];
    row.converged = o.exit_code == exit_code::ok && o.result->status == DescentStatus::converged;
    try {
      const double span = pb.u0() - pb.window.lower;
      auto shot = find_nonconstant(pb.p(), pb.N, pb.f, pb.m(), pb.window.lower + 1e-3 * span, pb.u0() - 1e-6 * span,
                                   pb.grid, shoot_config(local, pb));
      row.cross_oracle_sup = (shot.u.values - u).cwiseAbs().maxCoeff();
    } catch (const std::exception&) {
    }
    return row;
  };

  out.rows.resize(cfg.q_list.size());
  const std::size_t jobs = std::size_t(std::max(1, cfg.jobs));
  for (std::size_t begin = 0; begin < cfg.q_list.size(); begin += jobs) {
    std::vector<std::future<SweepRow>> batch;
    const std::size_t end = std::min(cfg.q_list.size(), begin + jobs);
    for (std::size_t i = begin; i < end; ++i)
      batch.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, row_for, cfg.q_list[i]));
    for (std::size_t i = begin; i < end; ++i) out.rows[i] = batch[i - begin].get();
  }

  out.all_converged = true;
  for (const auto& row : out.rows) {
    if (!row.converged) {
      out.all_converged = false;
      char buf[64];
      std::snprintf(buf, sizeof buf, "q=%g: ", row.q);
      out.messages.push_back(buf + row.status + (row.error.empty() ? "" : " (" + row.error + ")"));
    }
  }
  out.gap_decreasing = true;
  for (std::size_t i = 1; i < out.rows.size(); ++i)
    if (!(std::abs(out.rows[i].c_q - out.c_inf) < std::abs(out.rows[i - 1].c_q - out.c_inf))) out.gap_decreasing = false;
  if (!out.gap_decreasing) out.messages.push_back("|c_q - c_inf| is not strictly decreasing along q");
  out.exit_code = out.all_converged && out.gap_decreasing ? exit_code::ok : exit_code::solver;
  return out;
}

std::string sweep_csv(const SweepResult& s) {
  std::string out = "q,c_q,sup_dist_G,w1p_dist_G,h_q_G,u_at_0,u_at_1\n";
  char buf[512];
  for (const auto& r : s.rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.q, r.c_q, r.sup_dist_G,
                  r.w1p_dist_G, r.h_q_G, r.u_at_0, r.u_at_1);
    out += buf;
  }
  return out;
}

json sweep_json(const SweepResult& s) {
  json rows = json::array();
  for (const auto& r : s.rows) {
    rows.push_back({{"q", r.q},
                    {"c_q", r.c_q},
                    {"sup_dist_G", r.sup_dist_G},
                    {"w1p_dist_G", r.w1p_dist_G},
                    {"h_q_G", r.h_q_G},
                    {"u_at_0", r.u_at_0},
                    {"u_at_1", r.u_at_1},
                    {"gap_c", std::abs(r.c_q - s.c_inf)},
                    {"cross_oracle_sup", finite_or_null(r.cross_oracle_sup)},
                    {"status", r.status},
                    {"converged", r.converged}});
  }
  return {{"p", s.p},
          {"N", s.N},
          {"n_cells", s.n_cells},
          {"c_inf", s.c_inf},
          {"G_center", s.G_center},
          {"rows", rows},
          {"all_converged", s.all_converged},
          {"gap_decreasing", s.gap_decreasing},
          {"messages", s.messages},
          {"exit_code", s.exit_code}};
}

LimitOutcome run_limit(const RunConfig& cfg) {
  if (!(cfg.p >= 2)) throw ConfigError("limit needs p >= 2");
  ShootConfig sc;
  sc.rtol = cfg.rtol;
  return {solve_G(cfg.p, cfg.N, build_grid(cfg.N, cfg.n_cells), sc), cfg.p, cfg.N};
}

json limit_json(const LimitOutcome& l) {
  return {{"p", l.p},
          {"N", l.N},
          {"n_cells", l.profile.G.grid->n_cells()},
          {"center", l.profile.center},
          {"c_inf", l.profile.c_inf},
          {"c_inf_quadrature", l.profile.c_inf_quadrature},
          {"values", to_std(l.profile.G.values)}};
}

}  // namespace plap
