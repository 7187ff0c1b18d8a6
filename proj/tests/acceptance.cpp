// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance                 all criteria
//   acceptance --criterion k   criterion k only

#include "plap/pipeline.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

using namespace plap;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

RunConfig base_config(double p, double q, int N, int n) {
  RunConfig c;
  c.p = p;
  c.q = q;
  c.N = N;
  c.n_cells = n;
  return c;
}

Vector<double> random_cone(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> unif(0, 1);
  Vector<double> u(n);
  double acc = 0;
  for (int i = 0; i < n; ++i) u[i] = acc += unif(rng) * unif(rng);
  return (lo + (hi - lo) * u.array() / acc).matrix();
}

double sup_at_common_nodes(const Vector<double>& coarse, const Vector<double>& fine) {
  const Eigen::Index stride = (fine.size() - 1) / (coarse.size() - 1);
  double d = 0;
  for (Eigen::Index i = 0; i < coarse.size(); ++i) d = std::max(d, std::abs(coarse[i] - fine[stride * i]));
  return d;
}

Verdict constant_exactness() {
  Verdict v;
  for (auto [p, q] : {std::pair{3.0, 6.0}, {2.0, 10.0}, {1.5, 3.0}}) {
    for (int N : {1, 2, 3}) {
      const Problem pb = make_problem(base_config(p, q, N, 512), q, std::nullopt);
      const Vector<double> one = Vector<double>::Ones(pb.grid->n_nodes());
      const double res = residual_norm(*pb.grid, residual(*pb.grid, one, pb.f, 1.0, p));
      const double e = energy(*pb.grid, one, pb.f, 1.0, p), exact = sphere_measure<double>(N) / N * (1 / p - 1 / q);
      v.require(res <= 1e-12, "residual at (p,q,N) = (" + fmt("%g", p) + "," + fmt("%g", q) + "," +
                                  std::to_string(N) + ") is " + fmt("%.2e", res));
      v.require(std::abs(e - exact) <= 1e-12, "I(1) off by " + fmt("%.2e", std::abs(e - exact)));
    }
  }
  v.note("9 cases");
  return v;
}

Verdict cone_preservation() {
  Verdict v;
  std::mt19937_64 rng(2);
  double worst = INFINITY, lowest = INFINITY;
  for (int N : {1, 2, 3}) {
    const Problem pb = make_problem(base_config(3, 6, N, 512), 6, std::nullopt);
    const int count = N == 1 ? 34 : 33;
    for (int k = 0; k < count; ++k) {
      const Vector<double> u = random_cone(rng, 513, 0.0, 1.8);
      const Vector<double> t = tilde_T(*pb.grid, u, pb.f, 1.0, 3.0, inner_config(RunConfig{}));
      worst = std::min(worst, derivative(*pb.grid, t).minCoeff());
      lowest = std::min(lowest, t.minCoeff());
    }
  }
  v.require(lowest >= 0, "negative value " + fmt("%.2e", lowest));
  v.require(worst >= -1e-8, "min cell slope " + fmt("%.2e", worst));
  v.note("100 profiles, min value " + fmt("%.3e", lowest) + ", min cell slope " + fmt("%.3e", worst));
  return v;
}

Verdict gradient_consistency() {
  Verdict v;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0, 1);
  const Problem pb = make_problem(base_config(3, 6, 2, 512), 6, std::nullopt);
  const auto& g = *pb.grid;
  double worst = 0;
  for (int k = 0; k < 50; ++k) {
    const Vector<double> u = random_cone(rng, 513, 0.2, 1.6);
    Vector<double> dir = Vector<double>::Zero(513);
    for (int j = 0; j < 6; ++j) dir += gauss(rng) * (j * M_PI * g.nodes().array()).cos().matrix();
    const double h = 1e-5;
    const double fd = (energy(g, (u + h * dir).eval(), pb.f, 1.0, 3.0) - energy(g, (u - h * dir).eval(), pb.f, 1.0, 3.0)) /
                      (2 * h);
    const double an = residual(g, u, pb.f, 1.0, 3.0).dot(dir);
    worst = std::max(worst, std::abs(fd - an) / std::abs(an));
  }
  v.require(worst <= 1e-5, "relative error " + fmt("%.2e", worst));
  v.note("50 pairs, max relative error " + fmt("%.2e", worst));
  return v;
}

Verdict cross_oracle() {
  Verdict v;
  const RunConfig cfg = base_config(3, 6, 1, 2048);
  const SolveOutcome o = run_solve(cfg, std::nullopt, false);
  if (!o.result || o.exit_code != 0) {
    v.require(false, "descent: " + o.message);
    return v;
  }
  const Problem& pb = *o.problem;
  const auto shot = find_nonconstant(3.0, 1, pb.f, 1.0, pb.window.lower + 1e-3, 1 - 1e-6, pb.grid, shoot_config(cfg, pb));
  const Vector<double>& a = o.result->u.values;
  const Vector<double>& b = shot.u.values;
  const double d = (a - b).cwiseAbs().maxCoeff();
  v.require(o.result->residual <= 1e-8, "descent residual " + fmt("%.2e", o.result->residual));
  v.require(d <= 1e-4, "sup difference " + fmt("%.2e", d));
  v.require(a[0] < 1 && a[2048] > 1, "descent profile does not straddle 1");
  v.require(b[0] < 1 && b[2048] > 1, "shooting profile does not straddle 1");
  v.note("sup difference " + fmt("%.3e", d) + ", u(0) = " + fmt("%.8f", a[0]) + ", u(1) = " + fmt("%.8f", a[2048]));
  return v;
}

Verdict phase_plane() {
  Verdict v;
  for (auto [q, N] : {std::pair{6.0, 1}, {8.0, 2}, {16.0, 2}}) {
    const RunConfig cfg = base_config(3, q, N, 2048);
    const Problem pb = make_problem(cfg, q, std::nullopt);
    const auto shot = find_nonconstant(3.0, N, pb.f, 1.0, 1e-3, 1 - 1e-6, pb.grid, shoot_config(cfg, pb));
    const auto ph = phase_diagnostics(shot.shot.values, shot.shot.slopes, 3.0, q);
    const std::string tag = "q=" + fmt("%g", q) + ",N=" + std::to_string(N);
    v.require(ph.L_increases == 0, tag + ": " + std::to_string(ph.L_increases) + " L increases");
    v.require(ph.sigma_violations == 0, tag + ": " + std::to_string(ph.sigma_violations) + " phase-set violations");
    v.require(ph.sup_ok, tag + ": sup u " + fmt("%.6f", ph.sup_value) + " above " + fmt("%.6f", ph.sup_bound));
    v.require(ph.slope_ok, tag + ": max u' " + fmt("%.6f", ph.max_slope) + " above " + fmt("%.6f", ph.slope_bound));
    v.note(tag + " sup " + fmt("%.4f", ph.sup_value) + "<=" + fmt("%.4f", ph.sup_bound) + ", max u' " +
           fmt("%.4f", ph.max_slope) + "<=" + fmt("%.4f", ph.slope_bound));
  }
  return v;
}

Verdict certificate_signs() {
  Verdict v;
  for (auto [p, q] : {std::pair{3.0, 6.0}, {1.5, 3.0}}) {
    const Problem pb = make_problem(base_config(p, q, 1, 1024), q, std::nullopt);
    const auto rep = nonconstancy_certificate(*pb.grid, pb.f, 1.0, p, 1.0, centered_square(*pb.grid),
                                              {0.02, 0.05, 0.1}, pb.s0());
    std::string gaps = "p=" + fmt("%g", p) + " gaps";
    for (const auto& e : rep.entries) gaps += " " + fmt("%.3e", e.gap);
    v.require(rep.sign_ok, gaps);
    v.note(gaps);
  }
  return v;
}

Verdict nehari_scaling() {
  Verdict v;
  std::mt19937_64 rng(7);
  const Problem pb = make_problem(base_config(3, 6, 1, 512), 6, std::nullopt);
  double worst = 0;
  for (int k = 0; k < 20; ++k) {
    const Vector<double> u = random_cone(rng, 513, 0.05, 1.5);
    const double h = nehari_h(*pb.grid, u, pb.f, 1.0, 3.0);
    for (double c : {0.5, 2.0})
      worst = std::max(worst, std::abs(nehari_h(*pb.grid, (c * u).eval(), pb.f, 1.0, 3.0) * c - h) / h);
  }
  v.require(worst <= 1e-9, "relative deviation " + fmt("%.2e", worst));
  v.note("20 profiles, max relative deviation " + fmt("%.2e", worst));
  return v;
}

Verdict ray_max() {
  Verdict v;
  struct Case {
    double p, q;
    int N;
  };
  int count = 0;
  for (const Case& c : {Case{3, 6, 1}, Case{3, 8, 2}, Case{3, 16, 2}, Case{3, 32, 2}, Case{2, 20, 1}, Case{2, 40, 1},
                        Case{2, 80, 1}, Case{2.5, 7, 3}}) {
    const SolveOutcome o = run_solve(base_config(c.p, c.q, c.N, 2048), std::nullopt, false);
    if (!o.result || o.exit_code != 0) continue;
    const auto& pb = *o.problem;
    const auto ray = ray_max_check(*pb.grid, o.result->u.values, pb.f, 1.0, c.p);
    v.require(ray.ok, "(p,q,N) = (" + fmt("%g", c.p) + "," + fmt("%g", c.q) + "," + std::to_string(c.N) +
                          ") argmax t = " + fmt("%.4f", ray.argmax_t));
    ++count;
  }
  v.require(count >= 6, "only " + std::to_string(count) + " converged solutions to check");
  v.note(std::to_string(count) + " converged solutions, maximum at t = 1 within one cell");
  return v;
}

Verdict asymptotics_p2() {
  Verdict v;
  RunConfig cfg = base_config(2, 10, 1, 2048);
  cfg.command = "sweep";
  cfg.q_list = {10, 20, 40, 80};
  cfg.jobs = 4;
  const SweepResult s = run_sweep(cfg);
  const double c_inf = std::tanh(1.0);
  v.require(std::abs(s.c_inf - c_inf) <= 1e-8, "solve_G c_inf " + fmt("%.10f", s.c_inf));
  std::string gaps = "|c_q - tanh 1|:", dists = "sup|u_q - G|:", hs = "h_q(G):";
  for (std::size_t k = 0; k < s.rows.size(); ++k) {
    const auto& r = s.rows[k];
    gaps += " " + fmt("%.4f", std::abs(r.c_q - c_inf));
    dists += " " + fmt("%.4f", r.sup_dist_G);
    hs += " " + fmt("%.4f", r.h_q_G);
    v.require(r.converged, "q=" + fmt("%g", r.q) + " " + r.status);
    v.require(r.h_q_G > 0.8 && r.h_q_G < 1.05, "h_q(G) = " + fmt("%.4f", r.h_q_G) + " at q=" + fmt("%g", r.q));
    if (k > 0) {
      const auto& prev = s.rows[k - 1];
      v.require(std::abs(r.c_q - c_inf) < std::abs(prev.c_q - c_inf), "gap not decreasing at q=" + fmt("%g", r.q));
      v.require(r.sup_dist_G < prev.sup_dist_G, "distance to G not decreasing at q=" + fmt("%g", r.q));
      v.require(std::abs(r.h_q_G - 1) < std::abs(prev.h_q_G - 1), "|h_q(G) - 1| not decreasing at q=" + fmt("%g", r.q));
    }
  }
  const double last = std::abs(s.rows.back().c_q - c_inf);
  v.require(last <= 0.05, "|c_80 - tanh 1| = " + fmt("%.4f", last));
  v.note(gaps);
  v.note(dists);
  v.note(hs);
  return v;
}

Verdict asymptotics_p3() {
  Verdict v;
  RunConfig cfg = base_config(3, 8, 2, 2048);
  cfg.command = "sweep";
  cfg.q_list = {8, 16, 32};
  cfg.jobs = 3;
  const SweepResult s = run_sweep(cfg);
  std::string gaps = "c_inf " + fmt("%.6f", s.c_inf) + ", c_q - c_inf:", dists = "sup|u_q - G|:";
  for (std::size_t k = 0; k < s.rows.size(); ++k) {
    const auto& r = s.rows[k];
    gaps += " " + fmt("%.4f", r.c_q - s.c_inf);
    dists += " " + fmt("%.4f", r.sup_dist_G);
    v.require(r.converged, "q=" + fmt("%g", r.q) + " " + r.status);
    v.require(s.c_inf <= r.c_q, "c_inf > c_q at q=" + fmt("%g", r.q));
    if (k > 0) {
      const auto& prev = s.rows[k - 1];
      v.require(r.sup_dist_G < prev.sup_dist_G, "distance to G not decreasing at q=" + fmt("%g", r.q));
      v.require(std::abs(r.c_q - s.c_inf) < std::abs(prev.c_q - s.c_inf), "gap not decreasing at q=" + fmt("%g", r.q));
    }
  }
  v.note(gaps);
  v.note(dists);
  return v;
}

Verdict flow_monotonicity() {
  Verdict v;
  std::mt19937_64 rng(11);
  const RunConfig cfg = base_config(3, 6, 1, 256);
  const Problem pb = make_problem(cfg, 6, std::nullopt);
  double worst = -INFINITY;
  int steps = 0;
  for (int k = 0; k < 10; ++k) {
    const Vector<double> start = random_cone(rng, 257, 0.05, 1.5);
    const auto traj = euler_flow(*pb.grid, start, pb.f, 1.0, 3.0, Window<double>{pb.window.lower, pb.window.upper}, 1.0,
                                 1000, 1e-10, inner_config(cfg));
    for (std::size_t j = 1; j < traj.energies.size(); ++j) {
      worst = std::max(worst, traj.energies[j] - traj.energies[j - 1]);
      ++steps;
    }
  }
  v.require(worst <= 1e-12, "energy increase " + fmt("%.2e", worst));
  v.note(std::to_string(steps) + " steps, largest change " + fmt("%.2e", worst));
  return v;
}

Verdict truncation_invariance() {
  Verdict v;
  std::vector<Vector<double>> sols;
  double top = 0;
  for (double s0 : {2.0, 3.0}) {
    for (double ell : {3.5, 4.5}) {
      RunConfig cfg = base_config(3, 6, 1, 1024);
      cfg.s0 = s0;
      cfg.ell = ell;
      const SolveOutcome o = run_solve(cfg, std::nullopt, false);
      if (!o.result || o.exit_code != 0) {
        v.require(false, "s0=" + fmt("%g", s0) + ", ell=" + fmt("%g", ell) + ": " + o.message);
        continue;
      }
      sols.push_back(o.result->u.values);
      top = std::max(top, o.result->u.values.maxCoeff());
    }
  }
  double d = 0;
  for (std::size_t i = 0; i < sols.size(); ++i)
    for (std::size_t j = i + 1; j < sols.size(); ++j) d = std::max(d, (sols[i] - sols[j]).cwiseAbs().maxCoeff());
  v.require(d <= 1e-6, "solutions differ by " + fmt("%.2e", d));
  v.require(top < 2, "sup u = " + fmt("%.4f", top) + " reaches min s0");
  v.note("4 runs, max difference " + fmt("%.2e", d) + ", sup u " + fmt("%.6f", top));
  return v;
}

Verdict refinement() {
  Verdict v;
  std::vector<Vector<double>> sols;
  for (int n : {1024, 2048, 4096}) {
    const SolveOutcome o = run_solve(base_config(3, 6, 1, n), std::nullopt, false);
    if (!o.result || o.exit_code != 0) {
      v.require(false, "n=" + std::to_string(n) + ": " + o.message);
      return v;
    }
    sols.push_back(o.result->u.values);
  }
  const double d1 = sup_at_common_nodes(sols[0], sols[1]), d2 = sup_at_common_nodes(sols[1], sols[2]);
  v.require(d1 <= 4 * d2, "d(1024,2048) = " + fmt("%.3e", d1) + " > 4 d(2048,4096)");
  v.note("d(1024,2048) = " + fmt("%.3e", d1) + ", d(2048,4096) = " + fmt("%.3e", d2) + ", ratio " + fmt("%.2f", d1 / d2));
  return v;
}

const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
    {"constant-solution exactness", constant_exactness},
    {"cone preservation", cone_preservation},
    {"gradient consistency", gradient_consistency},
    {"cross-oracle equivalence", cross_oracle},
    {"phase-plane suite", phase_plane},
    {"nonconstancy certificate signs", certificate_signs},
    {"Nehari scaling law", nehari_scaling},
    {"ray-max certification", ray_max},
    {"asymptotics p = 2", asymptotics_p2},
    {"asymptotics p = 3", asymptotics_p3},
    {"descending flow monotonicity", flow_monotonicity},
    {"truncation invariance", truncation_invariance},
    {"refinement convergence", refinement},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-13)")->check(CLI::Range(1, int(criteria.size())));
  CLI11_PARSE(app, argc, argv);

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (only && int(k + 1) != only) continue;
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    std::printf("%s criterion %2zu (%s): %s\n", v.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                v.detail.c_str());
    std::fflush(stdout);
    failures += !v.pass;
  }
  return failures ? 1 : 0;
}
