#include "plap/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

namespace plap {

namespace {

// f~ with its sign flipped; used by inject_fault to check that the battery bites.
template <class Base>
struct Flipped {
  const Base& base;
  double value(double s) const { return -base.value(s); }
  double slope(double s) const { return -base.slope(s); }
  double primitive(double s) const { return -base.primitive(s); }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

class Battery {
 public:
  explicit Battery(VerifyReport& report) : report_(report) {}

  void check(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
    try {
      auto [ok, detail] = body();
      report_.results.push_back({name, ok ? "pass" : "fail", detail});
    } catch (const std::exception& e) {
      report_.results.push_back({name, "fail", std::string("exception: ") + e.what()});
    }
  }
  void skip(const std::string& name, const std::string& why) { report_.results.push_back({name, "skip", why}); }

 private:
  VerifyReport& report_;
};

Vector<double> random_cone_profile(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> unif(0, 1);
  Vector<double> u(n);
  double acc = 0;
  for (int i = 0; i < n; ++i) u[i] = acc += unif(rng);
  return (lo + (hi - lo) * u.array() / acc).matrix();
}

template <class Reaction>
void run_battery(const Problem& pb, const Reaction& f, const RunConfig& cfg, VerifyReport& report) {
  Battery bat(report);
  const auto& grid = *pb.grid;
  const double p = pb.p(), m = pb.m(), u0 = pb.u0(), s0 = pb.s0();
  const int n = grid.n_cells();
  const bool fine = n >= 64;
  const std::string coarse = "skipped: refinement invariant needs n_cells >= 64";
  std::mt19937_64 rng(cfg.seed);
  const auto inner = inner_config(cfg);

  bat.check("grid.weight_sum", [&] {
    const double err = std::abs(grid.node_weights().sum() - 1.0 / pb.N);
    return std::pair{err <= 1e-12, "error " + num(err)};
  });
  if (fine) {
    bat.check("grid.quadrature_refinement", [&] {
      auto coarse_grid = build_grid(pb.N, n / 2);
      auto err = [](const RadialGrid<double>& g) {
        return std::abs(g.node_weights().dot(g.nodes().array().pow(4.0).matrix()) - 1.0 / (4 + g.dimension()));
      };
      const double a = err(*coarse_grid), b = err(grid);
      return std::pair{b < a, "errors " + num(a) + " -> " + num(b)};
    });
  } else {
    bat.skip("grid.quadrature_refinement", coarse);
  }

  bat.check("cone.projection", [&] {
    std::normal_distribution<double> gauss(0, 1);
    for (int k = 0; k < 20; ++k) {
      Vector<double> a(n + 1);
      for (auto& x : a) x = gauss(rng);
      const Vector<double> b = (a.array() + 0.1).matrix();
      const Vector<double> pa = project_cone(grid, a, 0.0, 1.0), pb2 = project_cone(grid, b, 0.0, 1.0);
      if (!is_in_cone(pa) || pa.maxCoeff() > 1) return std::pair{false, std::string("output outside the window")};
      if (project_cone(grid, pa, 0.0, 1.0) != pa) return std::pair{false, std::string("not idempotent")};
      if ((pb2 - pa).minCoeff() < -1e-13) return std::pair{false, std::string("not order preserving")};
    }
    return std::pair{true, std::string("20 random inputs")};
  });

  bat.check("truncation.monotone", [&] {
    double prev = f.value(0.0);
    for (int i = 1; i <= 20000; ++i) {
      const double s = 4 * s0 * i / 20000;
      const double v = f.value(s);
      if (v < prev) return std::pair{false, "f~ decreases near s = " + num(s)};
      prev = v;
    }
    return std::pair{true, std::string("nondecreasing on [0, 4 s0]")};
  });

  bat.check("truncation.c1_junction", [&] {
    const double up = std::nextafter(s0, 2 * s0);
    const double dv = std::abs(f.value(up) - f.value(s0)), ds = std::abs(f.slope(up) - f.slope(s0));
    const bool ok = dv <= 1e-10 * std::max(1.0, std::abs(f.value(s0))) &&
                    ds <= 1e-8 * std::max(1.0, std::abs(f.slope(s0)));
    return std::pair{ok, "value jump " + num(dv) + ", slope jump " + num(ds)};
  });

  if (pb.spec.kind == SourceKind::power) {
    bat.check("truncation.ray_increasing", [&] {
      for (double s : {0.5, 1.0, 3 * s0}) {
        double last = -INFINITY;
        for (int k = 1; k <= 400; ++k) {
          const double t = 0.01 * k, v = f.value(t * s) / std::pow(t, p - 1);
          if (!(v > last)) return std::pair{false, "not increasing at s = " + num(s) + ", t = " + num(t)};
          last = v;
        }
      }
      return std::pair{true, std::string("t -> f~(ts)/t^(p-1) increasing")};
    });
  }

  bat.check("truncation.primitive", [&] {
    std::uniform_real_distribution<double> unif(0.05, 3 * s0);
    double worst = 0;
    for (int k = 0; k < 100; ++k) {
      const double s = unif(rng), h = 1e-5 * s;
      const double fd = (f.primitive(s + h) - f.primitive(s - h)) / (2 * h);
      worst = std::max(worst, std::abs(fd - f.value(s)) / (1 + std::abs(f.value(s))));
    }
    return std::pair{worst <= 1e-6, "max relative error " + num(worst)};
  });

  bat.check("truncation.growth", [&] {
    const auto& b = pb.f.params().bounds;
    for (int i = 0; i <= 2000; ++i) {
      const double s = b.M + (4 * s0 - b.M) * i / 2000;
      if (f.value(s) < (m + b.delta) * std::pow(s, p - 1) * (1 - 1e-12))
        return std::pair{false, "f~(s) < (m+delta)s^(p-1) at s = " + num(s)};
    }
    return std::pair{true, std::string("holds on [M, 4 s0]")};
  });

  bat.check("pde.constant_residual", [&] {
    const Vector<double> c = Vector<double>::Constant(n + 1, u0);
    const double r = residual_norm(grid, residual(grid, c, f, m, p));
    return std::pair{r <= 1e-12, "residual " + num(r)};
  });

  bat.check("pde.gradient_consistency", [&] {
    std::normal_distribution<double> gauss(0, 1);
    double worst = 0;
    for (int k = 0; k < 10; ++k) {
      const Vector<double> u = random_cone_profile(rng, n + 1, 0.3 * u0, 1.3 * u0);
      Vector<double> v = Vector<double>::Zero(n + 1);
      for (int k = 0; k < 6; ++k) v += gauss(rng) * (k * M_PI * grid.nodes().array()).cos().matrix();
      const double h = 1e-5;
      const double fd = (energy(grid, (u + h * v).eval(), f, m, p) - energy(grid, (u - h * v).eval(), f, m, p)) / (2 * h);
      const Vector<double> R = residual(grid, u, f, m, p);
      worst = std::max(worst, std::abs(fd - R.dot(v)) / (R.norm() * v.norm()));
    }
    return std::pair{worst <= 1e-6, "max error relative to |R||v| " + num(worst)};
  });

  bat.check("pde.cone_preservation", [&] {
    double worst = INFINITY;
    for (int k = 0; k < 10; ++k) {
      const Vector<double> u = random_cone_profile(rng, n + 1, 0.2 * u0, 1.5 * u0);
      const Vector<double> t = tilde_T(grid, u, f, m, p, inner);
      worst = std::min({worst, derivative(grid, t).minCoeff(), t.minCoeff() / grid.step()});
    }
    return std::pair{worst >= -1e-8, "min cell slope " + num(worst)};
  });

  bat.check("pde.descent_direction", [&] {
    for (int k = 0; k < 10; ++k) {
      const Vector<double> u = random_cone_profile(rng, n + 1, 0.2 * u0, 1.5 * u0);
      const Vector<double> t = tilde_T(grid, u, f, m, p, inner);
      const double pairing = residual(grid, u, f, m, p).dot(u - t);
      if (!(pairing > 0)) return std::pair{false, "I'(u)[u - T~u] = " + num(pairing)};
    }
    return std::pair{true, std::string("I'(u)[u - T~u] > 0 on 10 samples")};
  });

  bat.check("pde.eps_invariance", [&] {
    const Vector<double> b = (grid.nodes().array().cosh() * m).matrix();
    InnerSolverConfig half = inner;
    half.eps_min = inner.eps_min / 2;
    const double d = (solve_T(grid, b, m, p, inner) - solve_T(grid, b, m, p, half)).cwiseAbs().maxCoeff();
    return std::pair{d <= 1e-8, "sup difference " + num(d)};
  });

  if (fine) {
    bat.check("pde.refinement", [&] {
      auto g2 = build_grid(pb.N, 2 * n);
      const Vector<double> b1 = grid.nodes().array().cosh(), b2 = g2->nodes().array().cosh();
      const Vector<double> v1 = solve_T(grid, b1, m, p, inner), v2 = solve_T(*g2, b2, m, p, inner);
      double d = 0;
      for (int i = 0; i <= n; ++i) d = std::max(d, std::abs(v1[i] - v2[2 * i]));
      return std::pair{d <= 1.0 / n, "sup difference " + num(d) + " against 1/n = " + num(1.0 / n)};
    });
  } else {
    bat.skip("pde.refinement", coarse);
  }

  bat.check("minimax.nehari_scaling", [&] {
    double worst = 0;
    for (int k = 0; k < 5; ++k) {
      const Vector<double> u = random_cone_profile(rng, n + 1, 0.1, 1.2);
      const double h = nehari_h(grid, u, f, m, p);
      for (double c : {0.5, 2.0})
        worst = std::max(worst, std::abs(nehari_h(grid, (c * u).eval(), f, m, p) * c - h) / h);
    }
    return std::pair{worst <= 1e-9, "max relative deviation " + num(worst)};
  });

  bat.check("minimax.certificate_sign", [&] {
    const auto rep = nonconstancy_certificate(grid, f, m, p, u0, centered_square(grid), {0.02, 0.05, 0.1}, s0);
    std::string d = "gaps";
    for (const auto& e : rep.entries) d += " " + num(e.gap);
    return std::pair{rep.sign_ok, d};
  });

  bat.check("minimax.euler_monotone", [&] {
    const auto traj = euler_flow(grid, default_start(pb), f, m, p, Window<double>{pb.window.lower, pb.window.upper},
                                 0.02, 20, 1e-10, inner);
    double worst = 0;
    for (std::size_t k = 1; k < traj.energies.size(); ++k)
      worst = std::max(worst, traj.energies[k] - traj.energies[k - 1]);
    return std::pair{worst <= 1e-12, "largest energy increase " + num(worst)};
  });

  // the full solve, with the (possibly mutated) reaction term
  std::optional<SolveResult<double>> sol;
  bat.check("solution.descent", [&] {
    const RadialFunction<double> start(pb.grid, default_start(pb), true);
    sol = nehari_descent(start, f, m, p, u0, Window<double>{pb.window.lower, pb.window.upper}, descent_config(cfg));
    const bool ok = sol->status == DescentStatus::converged && sol->u.values.maxCoeff() < s0;
    return std::pair{ok, std::string(to_string(sol->status)) + ", residual " + num(sol->residual)};
  });
  if (sol && sol->status == DescentStatus::converged) {
    const Vector<double>& u = sol->u.values;
    bat.check("solution.cone", [&] { return std::pair{is_in_cone(u, 1e-12), std::string("nonnegative, nondecreasing")}; });
    bat.check("solution.ray_max", [&] {
      const auto ray = ray_max_check(grid, u, f, m, p);
      return std::pair{ray.ok, "argmax t = " + num(ray.argmax_t)};
    });
    bat.check("solution.fixed_point", [&] {
      const double d = (u - tilde_T(grid, u, f, m, p, inner)).cwiseAbs().maxCoeff();
      return std::pair{d <= 1e-6, "sup |u - T~u| = " + num(d)};
    });
    bat.check("solution.nehari_membership", [&] {
      const double gap = std::abs(residual(grid, u, f, m, p).dot(u)) / grid.angular_factor() / radial_norm_p(grid, u, m, p);
      return std::pair{gap <= 1e-8, "relative gap " + num(gap)};
    });
    bat.check("solution.below_u0_energy", [&] {
      const double e0 = energy(grid, Vector<double>::Constant(n + 1, u0).eval(), f, m, p);
      return std::pair{p <= 2 || sol->level < e0, "c = " + num(sol->level) + ", I(u0) = " + num(e0)};
    });
  }

  const double span = u0 - pb.window.lower;
  std::optional<ShootingSolution<double>> shot;
  bat.check("shooting.flux_positive", [&] {
    shot = find_nonconstant(p, pb.N, f, m, pb.window.lower + 1e-3 * span, u0 - 1e-6 * span, pb.grid,
                            shoot_config(cfg, pb));
    return std::pair{shot->shot.min_flux >= -1e-12, "min flux " + num(shot->shot.min_flux)};
  });
  if (shot && pb.spec.kind == SourceKind::power) {
    bat.check("shooting.phase_plane", [&] {
      const auto ph = phase_diagnostics(shot->shot.values, shot->shot.slopes, p, pb.spec.q);
      return std::pair{ph.ok(), std::to_string(ph.L_increases) + " L increases, " + std::to_string(ph.sigma_violations) +
                                    " phase-set violations"};
    });
  }
  if (shot && sol && sol->status == DescentStatus::converged) {
    if (fine) {
      bat.check("solution.cross_oracle", [&] {
        const double d = (shot->u.values - sol->u.values).cwiseAbs().maxCoeff();
        return std::pair{d <= 0.2 / n, "sup difference " + num(d) + " against " + num(0.2 / n)};
      });
    } else {
      bat.skip("solution.cross_oracle", coarse);
    }
  }

  if (p >= 2) {
    bat.check("shooting.limit_profile", [&] {
      const auto G = solve_G(p, pb.N, pb.grid);
      const double end = std::abs(G.G.values[n] - 1);
      const double agree = std::abs(G.c_inf - G.c_inf_quadrature) / G.c_inf;
      const bool ok = end <= 1e-10 && agree <= 1e-8 && is_in_cone(G.G.values) && G.G.values.minCoeff() > 0;
      return std::pair{ok, "|G(1)-1| = " + num(end) + ", c_inf identity mismatch " + num(agree)};
    });
  }

  if (fine) {
    bat.check("solution.refinement_convergence", [&] {
      const int base = std::max(64, n / 4);
      std::vector<Vector<double>> sols;
      for (int k : {base, 2 * base, 4 * base}) {
        auto g = build_grid(pb.N, k);
        const Vector<double> start = (u0 + 0.3 * u0 * centered_square(*g).array()).matrix();
        auto res = nehari_descent(RadialFunction<double>(g, start, true), f, m, p, u0,
                                  Window<double>{pb.window.lower, pb.window.upper}, descent_config(cfg));
        if (res.status != DescentStatus::converged) return std::pair{false, std::string("descent failed at n = ") + std::to_string(k)};
        sols.push_back(res.u.values);
      }
      double d1 = 0, d2 = 0;
      for (int i = 0; i <= base; ++i) {
        d1 = std::max(d1, std::abs(sols[0][i] - sols[1][2 * i]));
        d2 = std::max(d2, std::abs(sols[1][2 * i] - sols[2][4 * i]));
      }
      return std::pair{d1 <= 4 * d2, "differences " + num(d1) + ", " + num(d2)};
    });
  } else {
    bat.skip("solution.refinement_convergence", coarse);
  }
}

}  // namespace

bool VerifyReport::ok() const {
  for (const auto& r : results)
    if (r.status == "fail") return false;
  return true;
}

std::vector<std::string> VerifyReport::failing() const {
  std::vector<std::string> out;
  for (const auto& r : results)
    if (r.status == "fail") out.push_back(r.name);
  return out;
}

VerifyReport run_verify(const RunConfig& cfg) {
  VerifyReport report;
  const Problem pb = make_problem(cfg, cfg.q, cfg.s0);
  if (cfg.inject_fault) {
    run_battery(pb, Flipped<TruncatedNonlinearity<double>>{pb.f}, cfg, report);
  } else {
    run_battery(pb, pb.f, cfg, report);
  }
  return report;
}

json verify_json(const VerifyReport& report) {
  json rows = json::array();
  for (const auto& r : report.results) rows.push_back({{"name", r.name}, {"status", r.status}, {"detail", r.detail}});
  return {{"ok", report.ok()}, {"failing", report.failing()}, {"invariants", rows}};
}

}  // namespace plap
