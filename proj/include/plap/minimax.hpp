#pragma once

// Nehari projection, cone-constrained descent on the Nehari set, the Euler
// polygonal descending flow and the a-posteriori certificates built on them.

#include "plap/errors.hpp"
#include "plap/nonlinearity.hpp"
#include "plap/pde_ops.hpp"
#include "plap/radial_core.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace plap {

/// sum_k c_k |d_k|^p + m sum_i w_i |u_i|^p, i.e. ||u||^p / omega.
template <class Derived>
typename Derived::Scalar radial_norm_p(const RadialGrid<typename Derived::Scalar>& grid,
                                       const Eigen::MatrixBase<Derived>& u, typename Derived::Scalar m,
                                       typename Derived::Scalar p) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> d = derivative(grid, u);
  return grid.cell_weights().dot(d.array().abs().pow(p).matrix()) +
         m * grid.node_weights().dot(u.derived().array().abs().pow(p).matrix());
}

/// The unique t > 0 with t u on the Nehari set, i.e. the root of the
/// decreasing function rho(t) = ||u||^p - int f~(t u) u / t^{p-1}.
template <class Derived, class Reaction>
typename Derived::Scalar nehari_h(const RadialGrid<typename Derived::Scalar>& grid,
                                  const Eigen::MatrixBase<Derived>& u, const Reaction& f,
                                  typename Derived::Scalar m, typename Derived::Scalar p) {
  using Scalar = typename Derived::Scalar;
  detail::check_nodes(grid, u);
  if (u.minCoeff() < 0) throw std::invalid_argument("nehari_h: u must be nonnegative");
  if (u.maxCoeff() <= 0) throw std::invalid_argument("nehari_h: u must not vanish");
  const Scalar norm = radial_norm_p(grid, u, m, p);
  const auto& w = grid.node_weights();
  auto rho = [&](Scalar t) {
    Scalar s = 0;
    for (Eigen::Index i = 0; i < u.size(); ++i)
      if (u[i] > 0) s += w[i] * f.value(t * u[i]) * u[i];
    return norm - s / std::pow(t, p - 1);
  };
  Scalar lo = 1, hi = 1;
  if (rho(Scalar(1)) > 0) {
    int k = 0;
    while (rho(hi) > 0) {
      lo = hi;
      hi *= 2;
      if (++k > 200) throw NoBracket("nehari_h: no sign change along the ray");
    }
  } else {
    int k = 0;
    while (rho(lo) <= 0) {
      hi = lo;
      lo /= 2;
      if (++k > 200) throw NoBracket("nehari_h: no sign change along the ray");
    }
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const Scalar mid = (lo + hi) / 2;
    (rho(mid) > 0 ? lo : hi) = mid;
  }
  return (lo + hi) / 2;
}

template <class Scalar = double>
struct Window {
  Scalar lower = 0;
  Scalar upper = std::numeric_limits<Scalar>::infinity();
};

enum class DescentStatus { converged, converged_to_constant, max_iterations };

inline const char* to_string(DescentStatus s) {
  switch (s) {
    case DescentStatus::converged: return "converged";
    case DescentStatus::converged_to_constant: return "converged_to_constant";
    case DescentStatus::max_iterations: return "max_iterations";
  }
  return "unknown";
}

struct DescentConfig {
  double sigma = 1;
  double tol = 1e-9;  // on residual_norm, raised to 4x its rounding floor on fine grids
  int max_iter = 20000;
  double polish_threshold = 1e-3;
  double constant_tol = 1e-6;
  double hessian_eps = 1e-8;
};

struct DescentRecord {
  int iteration = 0;
  double energy = 0;
  double residual = 0;
  double sigma = 0;
  bool polish = false;
};

template <class Scalar = double>
struct SolveResult {
  RadialFunction<Scalar> u;
  Scalar level = 0;
  Scalar residual = 0;
  Scalar tolerance = 0;  // max(tol, 4 x rounding floor of the residual)
  int iterations = 0;
  DescentStatus status = DescentStatus::max_iterations;
};

namespace detail {

template <class Scalar, class Reaction>
bool polish(const RadialGrid<Scalar>& grid, Vector<Scalar>& u, const Reaction& f, Scalar m, Scalar p, Scalar tol) {
  Vector<Scalar> x = u;
  Scalar norm = residual_norm(grid, residual(grid, x, f, m, p));
  for (int it = 0; it < 40 && norm > tol; ++it) {
    Eigen::SparseLU<Eigen::SparseMatrix<Scalar>> lu;
    lu.compute(jacobian(grid, x, f, m, p));
    if (lu.info() != Eigen::Success) return false;
    const Vector<Scalar> step = lu.solve(-residual(grid, x, f, m, p));
    if (lu.info() != Eigen::Success || !step.allFinite()) return false;
    Scalar t = 1;
    bool moved = false;
    for (int bt = 0; bt < 30; ++bt, t /= 2) {
      const Vector<Scalar> trial = x + t * step;
      const Scalar trial_norm = residual_norm(grid, residual(grid, trial, f, m, p));
      if (trial_norm < norm) {
        x = trial;
        norm = trial_norm;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  if (!(norm <= tol)) return false;
  u = x;
  return true;
}

}  // namespace detail

/// Minimizes I over the Nehari set intersected with the cone window, starting
/// from `start`. Each step moves against the residual lifted through the
/// Hessian of the convex part of I, projects onto the window and rescales
/// onto the Nehari set; the step is halved until the energy decreases. Near a
/// critical point a Newton polish on I'(u) = 0 finishes the job; a polish
/// landing on the constant u0 or leaving the cone is discarded.
template <class Scalar, class Reaction>
SolveResult<Scalar> nehari_descent(const RadialFunction<Scalar>& start, const Reaction& f, Scalar m, Scalar p,
                                   Scalar u0, Window<Scalar> window, const DescentConfig& cfg = {},
                                   const std::function<void(const DescentRecord&)>& telemetry = {}) {
  const auto& grid = *start.grid;
  if (!is_in_cone(start.values) || start.values.minCoeff() < window.lower || start.values.maxCoeff() > window.upper)
    throw std::invalid_argument("nehari_descent: start must lie in the cone window");

  SolveResult<Scalar> out;
  auto finish = [&](const Vector<Scalar>& u, DescentStatus status, int iterations) {
    const auto report = energy_report(grid, u, f, m, p);
    out.u = RadialFunction<Scalar>(start.grid, u, is_in_cone(u));
    out.level = report.value;
    out.residual = report.residual_norm;
    out.tolerance = std::max<Scalar>(cfg.tol, 4 * residual_floor(grid, u, f, m, p));
    out.iterations = iterations;
    out.status = status;
    if (status == DescentStatus::converged && (u.array() - u0).abs().maxCoeff() <= cfg.constant_tol)
      out.status = DescentStatus::converged_to_constant;
    return out;
  };

  if ((start.values.array() - u0).abs().maxCoeff() <= cfg.constant_tol)
    return finish(start.values, DescentStatus::converged_to_constant, 0);

  Vector<Scalar> u = nehari_h(grid, start.values, f, m, p) * start.values;
  Scalar value = energy(grid, u, f, m, p);
  Scalar sigma = cfg.sigma;
  Scalar polish_below = cfg.polish_threshold;
  const Scalar omega = grid.angular_factor();

  for (int it = 1; it <= cfg.max_iter; ++it) {
    const Vector<Scalar> r = residual(grid, u, f, m, p);
    const Scalar rnorm = residual_norm(grid, r);
    const Scalar tol = std::max<Scalar>(cfg.tol, 4 * residual_floor(grid, u, f, m, p));
    if (telemetry) telemetry({it, double(value), double(rnorm), double(sigma), false});
    if (rnorm <= tol) return finish(u, DescentStatus::converged, it);
    if ((u.array() - u0).abs().maxCoeff() <= cfg.constant_tol && rnorm <= 1e-6)
      return finish(u, DescentStatus::converged, it);

    if (rnorm <= polish_below) {
      Vector<Scalar> trial = u;
      if (detail::polish(grid, trial, f, m, p, tol) &&
          (trial.array() - u0).abs().maxCoeff() > cfg.constant_tol && is_in_cone(trial, Scalar(1e-12)) &&
          trial.minCoeff() >= window.lower && trial.maxCoeff() <= window.upper) {
        if (telemetry) telemetry({it, double(energy(grid, trial, f, m, p)), double(residual_norm(grid, residual(grid, trial, f, m, p))), 0.0, true});
        return finish(trial, DescentStatus::converged, it);
      }
      polish_below = rnorm / 10;
    }

    auto [diag, off] = convex_hessian(grid, u, m, p, Scalar(cfg.hessian_eps));
    const Vector<Scalar> direction = detail::solve_tridiagonal<Scalar>(diag, off, r / omega);

    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt, sigma /= 2) {
      Vector<Scalar> v = project_cone(grid, (u - sigma * direction).eval(), window.lower, window.upper);
      if (v.maxCoeff() <= 0) continue;
      const Vector<Scalar> cand = nehari_h(grid, v, f, m, p) * v;
      if (cand.minCoeff() < window.lower || cand.maxCoeff() > window.upper) continue;
      const Scalar cand_value = energy(grid, cand, f, m, p);
      if (cand_value < value) {
        u = cand;
        value = cand_value;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // stalled at roundoff level: one last polish attempt decides
      Vector<Scalar> trial = u;
      if (detail::polish(grid, trial, f, m, p, tol) && is_in_cone(trial, Scalar(1e-12))) {
        const bool constant = (trial.array() - u0).abs().maxCoeff() <= cfg.constant_tol;
        return finish(trial, constant ? DescentStatus::converged_to_constant : DescentStatus::converged, it);
      }
      return finish(u, DescentStatus::max_iterations, it);
    }
    sigma = std::min<Scalar>(1, 2 * sigma);
  }
  return finish(u, DescentStatus::max_iterations, cfg.max_iter);
}

template <class Scalar = double>
struct FlowTrajectory {
  std::vector<Scalar> times;
  std::vector<Scalar> energies;
  std::vector<Scalar> distances;  // ||u - T~u|| at each sample
  Vector<Scalar> final_state;
  bool stopped_on_tolerance = false;
};

/// Euler polygonal of the flow along -(u - T~u)/||u - T~u|| with step T/n,
/// written as the convex combination (1 - lambda) u + lambda T~u with lambda
/// capped at 1, then projected onto the window. Stops early once
/// ||u - T~u|| <= stop_tol.
template <class Scalar, class Reaction>
FlowTrajectory<Scalar> euler_flow(const RadialGrid<Scalar>& grid, const Vector<Scalar>& start, const Reaction& f,
                                  Scalar m, Scalar p, Window<Scalar> window, Scalar horizon, int steps,
                                  Scalar stop_tol = 1e-10, const InnerSolverConfig& inner = {}) {
  if (steps < 1 || !(horizon > 0)) throw std::invalid_argument("euler_flow: need horizon > 0 and steps >= 1");
  const Scalar dt = horizon / steps;
  FlowTrajectory<Scalar> out;
  Vector<Scalar> u = start;
  for (int k = 0; k <= steps; ++k) {
    const Vector<Scalar> t = tilde_T(grid, u, f, m, p, inner);
    const Scalar dist = w1p_norm(grid, (u - t).eval(), p, m);
    out.times.push_back(k * dt);
    out.energies.push_back(energy(grid, u, f, m, p));
    out.distances.push_back(dist);
    if (k == 0 && dist <= stop_tol)
      throw std::invalid_argument("euler_flow: start is a fixed point of T~");
    if (dist <= stop_tol) {
      out.stopped_on_tolerance = true;
      break;
    }
    if (k == steps) break;
    const Scalar lambda = std::min<Scalar>(1, dt / dist);
    u = project_cone(grid, ((1 - lambda) * u + lambda * t).eval(), window.lower, window.upper);
  }
  out.final_state = u;
  return out;
}

template <class Scalar = double>
struct RayCheck {
  bool ok = false;
  Scalar argmax_t = 0;
  int argmax_index = 0;
  Scalar min_energy_up_to_one = 0;
  std::vector<Scalar> t;
  std::vector<Scalar> energies;
};

/// Samples I(t u) on 500 equally spaced t in [0.01, 5]; the maximum must sit
/// within one cell of t = 1 and I(t u) must stay positive for t <= 1.
template <class Derived, class Reaction>
RayCheck<typename Derived::Scalar> ray_max_check(const RadialGrid<typename Derived::Scalar>& grid,
                                                 const Eigen::MatrixBase<Derived>& u, const Reaction& f,
                                                 typename Derived::Scalar m, typename Derived::Scalar p) {
  using Scalar = typename Derived::Scalar;
  RayCheck<Scalar> out;
  const int count = 500;
  const Scalar lo = Scalar(0.01), hi = 5, dt = (hi - lo) / (count - 1);
  Scalar best = -std::numeric_limits<Scalar>::infinity();
  int one = 0;
  out.min_energy_up_to_one = std::numeric_limits<Scalar>::infinity();
  for (int k = 0; k < count; ++k) {
    const Scalar t = lo + k * dt;
    const Scalar e = energy(grid, (t * u.derived()).eval(), f, m, p);
    out.t.push_back(t);
    out.energies.push_back(e);
    if (e > best) {
      best = e;
      out.argmax_index = k;
    }
    if (std::abs(t - 1) < std::abs(out.t[one] - 1)) one = k;
    if (t <= 1 + dt / 2) out.min_energy_up_to_one = std::min(out.min_energy_up_to_one, e);
  }
  out.argmax_t = out.t[out.argmax_index];
  out.ok = std::abs(out.argmax_index - one) <= 1 && out.min_energy_up_to_one > 0;
  return out;
}

template <class Scalar = double>
struct CertificateEntry {
  Scalar s = 0;
  Scalar h = 1;
  Scalar gap = 0;  // I(h(s)(u0 + s v)) - I(u0)
};

template <class Scalar = double>
struct CertificateReport {
  std::vector<CertificateEntry<Scalar>> entries;
  int expected_sign = 0;  // -1 for p > 2, +1 for p < 2, 0 for p = 2
  bool sign_ok = false;
};

/// Energy gap of the Nehari-rescaled perturbations u0 + s v of the constant
/// state. Below the constant for p > 2, above it for p < 2.
template <class Scalar, class Reaction>
CertificateReport<Scalar> nonconstancy_certificate(const RadialGrid<Scalar>& grid, const Reaction& f, Scalar m,
                                                   Scalar p, Scalar u0, const Vector<Scalar>& v,
                                                   const std::vector<Scalar>& s_list, Scalar upper) {
  detail::check_nodes(grid, v);
  if (std::abs(integrate(grid, v)) > 1e-10) throw std::invalid_argument("certificate: v must have zero mean");
  if (!is_in_cone((v.array() - v.minCoeff()).matrix()))
    throw std::invalid_argument("certificate: v must be nondecreasing");
  const Vector<Scalar> one = Vector<Scalar>::Constant(grid.n_nodes(), u0);
  const Scalar base = energy(grid, one, f, m, p);
  CertificateReport<Scalar> out;
  out.expected_sign = p > 2 ? -1 : (p < 2 ? 1 : 0);
  out.sign_ok = true;
  for (Scalar s : s_list) {
    const Vector<Scalar> w = one + s * v;
    if (w.minCoeff() < 0 || w.maxCoeff() > upper)
      throw std::invalid_argument("certificate: u0 + s v leaves [0, s0]");
    CertificateEntry<Scalar> e;
    e.s = s;
    e.h = nehari_h(grid, w, f, m, p);
    e.gap = energy(grid, (e.h * w).eval(), f, m, p) - base;
    out.entries.push_back(e);
    if (s != 0 && out.expected_sign != 0 && !(e.gap * out.expected_sign > 0)) out.sign_ok = false;
  }
  return out;
}

template <class Scalar = double>
struct GeometrySample {
  Scalar min_gap = 0;
  Scalar constant_gap = 0;
  int samples = 0;
};

/// Energy gaps I(u_- + w) - I(u_-) over random nondecreasing w >= 0 with
/// sup w = w(1) = tau, including the constant w = tau.
template <class Scalar, class Reaction>
GeometrySample<Scalar> mp_geometry_sample(const RadialGrid<Scalar>& grid, const Reaction& f, Scalar m, Scalar p,
                                          Scalar lower, Scalar tau, int n_samples, std::uint64_t seed) {
  if (tau < 0) throw std::invalid_argument("mp_geometry_sample: tau must be nonnegative");
  const int n = grid.n_nodes();
  const Vector<Scalar> base_state = Vector<Scalar>::Constant(n, lower);
  const Scalar base = energy(grid, base_state, f, m, p);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0, 1);

  GeometrySample<Scalar> out;
  out.constant_gap = energy(grid, (base_state.array() + tau).matrix().eval(), f, m, p) - base;
  out.min_gap = out.constant_gap;
  out.samples = 1;
  for (int k = 1; k < n_samples; ++k) {
    Vector<Scalar> w(n);
    const double density = unif(rng);
    Scalar acc = 0;
    for (int i = 0; i < n; ++i) {
      if (unif(rng) < density) acc += Scalar(unif(rng));
      w[i] = acc;
    }
    const Scalar floor = Scalar(unif(rng));
    if (acc > 0) {
      w = tau * (floor + (1 - floor) * w.array() / acc).matrix();
    } else {
      w.setConstant(tau);
    }
    w[n - 1] = tau;
    const Scalar gap = energy(grid, (base_state + w).eval(), f, m, p) - base;
    out.min_gap = std::min(out.min_gap, gap);
    ++out.samples;
  }
  return out;
}

}  // namespace plap
