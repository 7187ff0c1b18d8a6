#pragma once

// Radial shooting for -Delta_p u + m u^{p-1} = f~(u), written for the state
// (u, mu) with mu = r^{N-1} |u'|^{p-2} u', so that
//
//   u'  = sign(mu) (|mu| / r^{N-1})^{1/(p-1)}
//   mu' = r^{N-1} (m |u|^{p-2} u - f~(u))
//
// A third component accumulates int r^{N-1} (|u'|^p + m |u|^p) dr.

#include "plap/errors.hpp"
#include "plap/pde_ops.hpp"
#include "plap/radial_core.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace plap {

/// f = 0; used for the limit profile G.
struct ZeroReaction {
  template <class Scalar>
  Scalar value(Scalar) const { return 0; }
  template <class Scalar>
  Scalar slope(Scalar) const { return 0; }
  template <class Scalar>
  Scalar primitive(Scalar) const { return 0; }
};

struct ShootConfig {
  double rtol = 1e-10;
  double r_start = 1e-4;
  double blowup = 20;  // |u| above this aborts the shot
  int max_steps = 2000000;
};

template <class Scalar = double>
struct Shot {
  Scalar a = 0;
  Scalar miss = 0;  // mu(1), the Neumann defect at r = 1
  Scalar u_end = 0;
  Scalar mass_end = 0;  // int_0^1 r^{N-1}(|u'|^p + m|u|^p) dr
  Scalar min_flux = 0;
  Vector<Scalar> values;  // at the requested nodes, if any
  Vector<Scalar> slopes;
  Vector<Scalar> flux;
};

namespace detail {

template <class Scalar, class Reaction>
struct RadialOde {
  Scalar p, m;
  int dimension;
  const Reaction& f;
  using State = Eigen::Matrix<Scalar, 3, 1>;

  Scalar slope(Scalar r, Scalar mu) const {
    const Scalar rk = dimension == 1 ? Scalar(1) : std::pow(r, Scalar(dimension - 1));
    return mu == 0 ? Scalar(0) : std::copysign(std::pow(std::abs(mu) / rk, 1 / (p - 1)), mu);
  }
  State operator()(Scalar r, const State& y) const {
    const Scalar rk = dimension == 1 ? Scalar(1) : std::pow(r, Scalar(dimension - 1));
    const Scalar du = slope(r, y[1]);
    State out;
    out[0] = du;
    out[1] = rk * (m * signed_pow(y[0], p - 1) - Scalar(f.value(y[0])));
    out[2] = rk * (std::pow(std::abs(du), p) + m * std::pow(std::abs(y[0]), p));
    return out;
  }
};

}  // namespace detail

/// Integrates from the center value a to r = 1 with an embedded Dormand-Prince
/// 5(4) pair. The first r_start is covered by the series
///   u = a + K^{1/(p-1)} (p-1)/p r^{p/(p-1)},  mu = K' r^N / N,  K' = m a^{p-1} - f~(a), K = K'/N.
/// `nodes` (sorted, in [0,1]) are hit exactly and sampled.
template <class Scalar, class Reaction>
Shot<Scalar> shoot(Scalar a, Scalar p, int dimension, const Reaction& f, Scalar m, const ShootConfig& cfg = {},
                   const Vector<Scalar>* nodes = nullptr) {
  using State = typename detail::RadialOde<Scalar, Reaction>::State;
  if (!(p > 1)) throw std::invalid_argument("shoot: p must exceed 1");
  if (dimension < 1) throw std::invalid_argument("shoot: dimension must be >= 1");
  const detail::RadialOde<Scalar, Reaction> ode{p, m, dimension, f};
  const Scalar r0 = cfg.r_start;
  const Scalar lead = m * detail::signed_pow(a, p - 1) - Scalar(f.value(a));

  auto series = [&](Scalar r) {
    State y;
    y[0] = a + detail::signed_pow(lead / dimension, 1 / (p - 1)) * (p - 1) / p * std::pow(r, p / (p - 1));
    y[1] = lead * std::pow(r, Scalar(dimension)) / dimension;
    y[2] = m * std::pow(std::abs(a), p) * std::pow(r, Scalar(dimension)) / dimension;
    return y;
  };

  Shot<Scalar> out;
  out.a = a;
  const Eigen::Index count = nodes ? nodes->size() : 0;
  out.values.resize(count);
  out.slopes.resize(count);
  out.flux.resize(count);
  Eigen::Index next = 0;
  auto record = [&](Scalar r, const State& y) {
    out.values[next] = y[0];
    out.slopes[next] = r == 0 ? Scalar(0) : ode.slope(r, y[1]);
    out.flux[next] = y[1];
    ++next;
  };
  while (next < count && (*nodes)[next] <= r0) record((*nodes)[next], series((*nodes)[next]));

  // Dormand-Prince 5(4) tableau
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  Scalar r = r0;
  State y = series(r0);
  Scalar min_flux = std::min<Scalar>(0, y[1]);
  Scalar h_free = Scalar(1e-3);
  State k1 = ode(r, y);
  const Scalar atol = Scalar(cfg.rtol) * Scalar(1e-3);
  int steps = 0;
  while (r < 1) {
    if (++steps > cfg.max_steps) throw NonConvergence("shoot: step budget exhausted", double(r));
    const Scalar target = next < count ? std::min<Scalar>((*nodes)[next], 1) : Scalar(1);
    if (target - r <= Scalar(1e-14)) {
      r = target;
      while (next < count && (*nodes)[next] <= r) record((*nodes)[next], y);
      continue;
    }
    Scalar h = h_free;
    bool hits = false;
    if (r + h >= target) {
      h = target - r;
      hits = true;
    }
    const State k2 = ode(r + c2 * h, y + h * (a21 * k1));
    const State k3 = ode(r + c3 * h, y + h * (a31 * k1 + a32 * k2));
    const State k4 = ode(r + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const State k5 = ode(r + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const State k6 = ode(r + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const State y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const State k7 = ode(r + h, y_new);
    const State err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    Scalar norm = 0;
    for (int i = 0; i < 2; ++i) {
      const Scalar scale = atol + Scalar(cfg.rtol) * std::max(std::abs(y[i]), std::abs(y_new[i]));
      norm = std::max(norm, std::abs(err[i]) / scale);
    }
    if (!std::isfinite(norm)) {
      h_free = h / 4;
      if (h_free < 1e-14) throw OutOfRange("shoot: integration broke down");
      continue;
    }
    const bool accepted = norm <= 1;
    if (accepted) {
      r = hits ? target : r + h;
      y = y_new;
      k1 = k7;
      min_flux = std::min(min_flux, y[1]);
      if (std::abs(y[0]) > cfg.blowup) throw OutOfRange("shoot: |u| exceeded the blow-up bound");
      while (next < count && (*nodes)[next] <= r) record((*nodes)[next], y);
    }
    const Scalar factor =
        norm == 0 ? Scalar(5) : std::clamp<Scalar>(Scalar(0.9) * std::pow(norm, Scalar(-0.2)), Scalar(0.2), Scalar(5));
    // a step shortened to land on a node says little about the free step size
    h_free = hits && accepted ? std::max(h_free, h * factor) : h * factor;
    if (h_free < 1e-14) throw OutOfRange("shoot: step size underflow");
  }
  out.miss = y[1];
  out.u_end = y[0];
  out.mass_end = y[2];
  out.min_flux = min_flux;
  return out;
}

template <class Scalar = double>
struct ShootingSolution {
  Shot<Scalar> shot;
  RadialFunction<Scalar> u;
  int bisections = 0;
};

/// Scans the center value upward over [lo, hi] for the first change of the
/// miss from + to -, then bisects until |miss| <= 1e-10 or the bracket is
/// exhausted. Shots that blow up are skipped.
template <class Scalar, class Reaction>
ShootingSolution<Scalar> find_nonconstant(Scalar p, int dimension, const Reaction& f, Scalar m, Scalar lo, Scalar hi,
                                          GridPtr<Scalar> grid, const ShootConfig& cfg = {}, int scan_points = 400) {
  if (!(lo < hi)) throw std::invalid_argument("find_nonconstant: empty bracket");
  auto miss = [&](Scalar a) { return shoot(a, p, dimension, f, m, cfg).miss; };
  bool have_prev = false;
  Scalar prev_a = lo, prev_miss = 0;
  std::optional<std::pair<Scalar, Scalar>> bracket;
  for (int k = 0; k < scan_points && !bracket; ++k) {
    const Scalar a = lo + (hi - lo) * k / (scan_points - 1);
    Scalar value;
    try {
      value = miss(a);
    } catch (const OutOfRange&) {
      have_prev = false;
      continue;
    }
    if (have_prev && prev_miss > 0 && value < 0) bracket = {prev_a, a};
    if (value == 0 && have_prev && prev_miss > 0) bracket = {a, a};
    prev_a = a;
    prev_miss = value;
    have_prev = true;
  }
  if (!bracket) throw NoSignChange("find_nonconstant: the miss function has no + to - change on the bracket");

  // keep the side with nonnegative miss so the flux stays nonnegative on [0, 1];
  // bisection shots stop at the grid nodes, so the kept shot is the reported profile
  ShootingSolution<Scalar> out;
  auto [left, right] = *bracket;
  auto node_shot = [&](Scalar a) { return shoot(a, p, dimension, f, m, cfg, &grid->nodes()); };
  std::optional<Shot<Scalar>> kept;
  if (auto s = node_shot(left); s.miss >= 0) kept = std::move(s);
  while (right - left > Scalar(1e-15) * right && out.bisections < 200) {
    const Scalar mid = (left + right) / 2;
    Shot<Scalar> s = node_shot(mid);
    ++out.bisections;
    const Scalar value = s.miss;
    (value >= 0 ? left : right) = mid;
    if (value >= 0) kept = std::move(s);
    if (value >= 0 && value <= 1e-10) break;
  }
  out.shot = kept ? std::move(*kept) : node_shot(left);
  out.u = RadialFunction<Scalar>(grid, out.shot.values, is_in_cone(out.shot.values));
  return out;
}

template <class Scalar = double>
struct LimitProfile {
  RadialFunction<Scalar> G;
  Vector<Scalar> slopes;
  Scalar center = 0;
  Scalar c_inf = 0;             // omega mu(1) / p
  Scalar c_inf_quadrature = 0;  // omega int (|G'|^p + G^p) r^{N-1} / p
};

/// G solves -Delta_p G + G^{p-1} = 0 with G'(0) = 0, G(1) = 1. The equation is
/// (p-1)-homogeneous, so the unit-center shot rescaled by its end value gives
/// the center; a secant correction handles the residual rounding.
template <class Scalar>
LimitProfile<Scalar> solve_G(Scalar p, int dimension, GridPtr<Scalar> grid, const ShootConfig& cfg = {}) {
  if (!(p >= 2)) throw std::invalid_argument("solve_G: requires p >= 2");
  const ZeroReaction zero;
  ShootConfig local = cfg;
  local.blowup = 1e6;
  const Scalar unit = shoot(Scalar(1), p, dimension, zero, Scalar(1), local).u_end;
  if (!(unit > 1)) throw NoSignChange("solve_G: unit shot does not grow");
  Scalar a = 1 / unit;
  Shot<Scalar> shot = shoot(a, p, dimension, zero, Scalar(1), local, &grid->nodes());
  Scalar prev_a = 1, prev_end = unit;
  for (int it = 0; it < 20 && std::abs(shot.u_end - 1) > 1e-12; ++it) {
    const Scalar next = a - (shot.u_end - 1) * (a - prev_a) / (shot.u_end - prev_end);
    prev_a = a;
    prev_end = shot.u_end;
    a = next;
    shot = shoot(a, p, dimension, zero, Scalar(1), local, &grid->nodes());
  }
  if (!(a > 0 && a < 1)) throw NoSignChange("solve_G: center value outside (0, 1)");
  LimitProfile<Scalar> out;
  out.G = RadialFunction<Scalar>(grid, shot.values, is_in_cone(shot.values));
  out.slopes = shot.slopes;
  out.center = a;
  out.c_inf = grid->angular_factor() * shot.miss / p;
  out.c_inf_quadrature = grid->angular_factor() * shot.mass_end / p;
  return out;
}

template <class Scalar = double>
struct PhaseDiagnostics {
  Vector<Scalar> L;
  int L_increases = 0;
  int sigma_violations = 0;
  Scalar sup_bound = 0;
  Scalar slope_bound = 0;
  Scalar sup_value = 0;
  Scalar max_slope = 0;
  bool sup_ok = false;
  bool slope_ok = false;
  bool ok() const { return L_increases == 0 && sigma_violations == 0 && sup_ok && slope_ok; }
};

/// First-integral diagnostics for pure-power solutions from node values and
/// slopes: L = ((p-1)/p) u'^p - u^p/p + u^q/q must not increase, (u, u') must
/// lie in the set bounded by L <= 0, and u, u' obey the closed-form bounds.
template <class Scalar>
PhaseDiagnostics<Scalar> phase_diagnostics(const Vector<Scalar>& u, const Vector<Scalar>& du, Scalar p, Scalar q,
                                           Scalar tol = 1e-8) {
  if (u.size() != du.size()) throw std::invalid_argument("phase_diagnostics: size mismatch");
  PhaseDiagnostics<Scalar> out;
  const Eigen::Index n = u.size();
  out.L.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar s = std::abs(du[i]);
    out.L[i] = (p - 1) / p * std::pow(s, p) - std::pow(u[i], p) / p + std::pow(u[i], q) / q;
    if (i > 0 && out.L[i] > out.L[i - 1] + tol) ++out.L_increases;
    const Scalar bracket = p / (p - 1) * (std::pow(u[i], p) / p - std::pow(u[i], q) / q);
    if (du[i] < -tol) ++out.sigma_violations;
    else if (bracket >= 0 && std::pow(std::max<Scalar>(du[i], 0), p) > bracket + tol) ++out.sigma_violations;
  }
  out.sup_bound = std::pow(q / p, 1 / (q - p));
  out.slope_bound = std::pow((q - p) / (q * (p - 1)), 1 / p);
  out.sup_value = u.maxCoeff();
  out.max_slope = du.maxCoeff();
  out.sup_ok = out.sup_value <= out.sup_bound;
  out.slope_ok = out.max_slope <= out.slope_bound;
  return out;
}

}  // namespace plap
