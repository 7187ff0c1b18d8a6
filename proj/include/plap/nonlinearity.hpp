#pragma once

// Reaction terms g, their shift f = g + C s^{p-1}, and the subcritical
// truncation f~ (with primitive F~) used by every solver.

#include "plap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <type_traits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace plap {

/// Anything usable as the reaction term of the truncated problem.
template <class N, class Scalar>
concept ReactionTerm = requires(const N& f, Scalar s) {
  { f.value(s) } -> std::convertible_to<Scalar>;
  { f.slope(s) } -> std::convertible_to<Scalar>;
  { f.primitive(s) } -> std::convertible_to<Scalar>;
};

template <class Scalar = double>
struct Source {
  std::function<Scalar(Scalar)> value;
  std::function<Scalar(Scalar)> slope;
};

enum class SourceKind { power, general };

inline constexpr double scan_cap = 1e6;

template <class Scalar = double>
struct NonlinearitySpec {
  SourceKind kind = SourceKind::power;
  Scalar p = 2;
  Scalar q = std::numeric_limits<Scalar>::quiet_NaN();  // power kind only
  Source<Scalar> g;
  Scalar shift_constant = 0;
  Scalar m = 1;
  Scalar u0 = 1;

  /// f(s) = g(s) + C s^{p-1}; extended to s < 0 by the constant f(0).
  Scalar f(Scalar s) const {
    if (s <= 0) s = 0;
    if (kind == SourceKind::power) return std::pow(s, q - 1);
    return g.value(s) + shift_constant * std::pow(s, p - 1);
  }
  Scalar df(Scalar s) const {
    if (s < 0) return 0;
    if (kind == SourceKind::power) return s == 0 ? (q > 2 ? 0 : std::numeric_limits<Scalar>::infinity())
                                                 : (q - 1) * std::pow(s, q - 2);
    const Scalar shift = s == 0 ? 0 : shift_constant * (p - 1) * std::pow(s, p - 2);
    return g.slope(s) + shift;
  }
};

/// g(s) = s^{q-1}: no shift, m = 1, u0 = 1.
template <class Scalar = double>
NonlinearitySpec<Scalar> power_law(Scalar p, Scalar q) {
  if (!(p > 1)) throw std::invalid_argument("p must exceed 1");
  if (!(q > p)) throw std::invalid_argument("q must exceed p");
  NonlinearitySpec<Scalar> spec;
  spec.kind = SourceKind::power;
  spec.p = p;
  spec.q = q;
  spec.g = {[q](Scalar s) { return std::pow(s, q - 1); },
            [q](Scalar s) { return (q - 1) * std::pow(s, q - 2); }};
  return spec;
}

namespace detail {

template <class Scalar, class Fn>
Scalar bisect(Fn&& fn, Scalar lo, Scalar hi, Scalar rel_tol = 1e-15) {
  Scalar flo = fn(lo);
  for (int it = 0; it < 200 && hi - lo > rel_tol * std::max(std::abs(lo), std::abs(hi)); ++it) {
    const Scalar mid = (lo + hi) / 2;
    const Scalar fm = fn(mid);
    if (fm == 0) return mid;
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return (lo + hi) / 2;
}

template <class Scalar>
std::vector<Scalar> log_grid(Scalar lo, Scalar hi, int count) {
  std::vector<Scalar> s(count);
  const Scalar a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < count; ++i) s[i] = std::exp(a + (b - a) * i / (count - 1));
  s.front() = lo;
  s.back() = hi;
  return s;
}

}  // namespace detail

/// Upward crossings of f(s) = m s^{p-1}; picks the one nearest `hint`
/// (or the first one when no hint is given).
template <class Scalar>
Scalar locate_u0(const NonlinearitySpec<Scalar>& spec, Scalar hint = std::numeric_limits<Scalar>::quiet_NaN()) {
  auto gap = [&](Scalar s) { return spec.f(s) - spec.m * std::pow(s, spec.p - 1); };
  const auto grid = detail::log_grid<Scalar>(1e-6, scan_cap, 6000);
  std::optional<Scalar> best;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (gap(grid[i]) < 0 && gap(grid[i + 1]) > 0) {
      const Scalar root = detail::bisect<Scalar>(gap, grid[i], grid[i + 1]);
      if (!best || (!std::isnan(hint) && std::abs(root - hint) < std::abs(*best - hint))) best = root;
      if (std::isnan(hint)) break;
    }
  }
  if (!best) throw NoBracket("no transversal root of f(s) = m s^(p-1) below the scan cap");
  return *best;
}

/// Shift: the smallest C >= 0 making g + C s^{p-1} nondecreasing on a
/// dense sample of (0, s_max], inflated by 10%.
template <class Scalar>
NonlinearitySpec<Scalar> shift(Source<Scalar> g, Scalar p, Scalar s_max,
                               Scalar u0_hint = std::numeric_limits<Scalar>::quiet_NaN()) {
  if (!(p > 1)) throw std::invalid_argument("p must exceed 1");
  if (!(s_max > 0)) throw std::invalid_argument("shift: s_max must be positive");
  Scalar worst = 0;
  for (Scalar s : detail::log_grid<Scalar>(s_max * 1e-6, s_max, 20000)) {
    const Scalar need = -g.slope(s) / ((p - 1) * std::pow(s, p - 2));
    if (!std::isfinite(need)) throw NoBracket("shift: no finite constant makes f nondecreasing");
    worst = std::max(worst, need);
  }
  const Scalar c = Scalar(1.1) * worst;
  if (c > 1e12) throw NoBracket("shift: no finite constant makes f nondecreasing");

  NonlinearitySpec<Scalar> spec;
  spec.kind = SourceKind::general;
  spec.p = p;
  spec.g = std::move(g);
  spec.shift_constant = c;
  spec.m = 1 + c;
  spec.u0 = locate_u0(spec, u0_hint);
  return spec;
}

/// Piecewise cubic Hermite interpolant of tabulated (s, g, g'), extended past the
/// last sample by the power law matching value and slope there.
template <class Scalar>
Source<Scalar> table_source(std::vector<Scalar> s, std::vector<Scalar> g, std::vector<Scalar> dg) {
  if (s.size() < 2 || s.size() != g.size() || s.size() != dg.size())
    throw std::invalid_argument("table: need at least two rows of (s, g, g')");
  for (std::size_t i = 0; i + 1 < s.size(); ++i)
    if (!(s[i] < s[i + 1])) throw std::invalid_argument("table: s must be strictly increasing");
  if (s.front() != 0) throw std::invalid_argument("table: first row must have s = 0");
  struct Table {
    std::vector<Scalar> s, g, dg;
    Scalar exponent;
    std::pair<std::size_t, Scalar> locate(Scalar x) const {
      auto it = std::upper_bound(s.begin(), s.end(), x);
      std::size_t k = it == s.begin() ? 0 : std::size_t(it - s.begin()) - 1;
      k = std::min(k, s.size() - 2);
      return {k, (x - s[k]) / (s[k + 1] - s[k])};
    }
    Scalar value(Scalar x) const {
      if (x >= s.back()) return g.back() * std::pow(x / s.back(), exponent);
      auto [k, t] = locate(std::max(x, Scalar(0)));
      const Scalar h = s[k + 1] - s[k];
      return (2 * t * t * t - 3 * t * t + 1) * g[k] + (t * t * t - 2 * t * t + t) * h * dg[k] +
             (-2 * t * t * t + 3 * t * t) * g[k + 1] + (t * t * t - t * t) * h * dg[k + 1];
    }
    Scalar slope(Scalar x) const {
      if (x >= s.back()) return g.back() * exponent * std::pow(x / s.back(), exponent - 1) / s.back();
      auto [k, t] = locate(std::max(x, Scalar(0)));
      const Scalar h = s[k + 1] - s[k];
      return ((6 * t * t - 6 * t) * g[k] + (3 * t * t - 4 * t + 1) * h * dg[k] +
              (-6 * t * t + 6 * t) * g[k + 1] + (3 * t * t - 2 * t) * h * dg[k + 1]) /
             h;
    }
  };
  auto table = std::make_shared<Table>();
  table->exponent = g.back() > 0 ? s.back() * dg.back() / g.back() : 1;
  table->s = std::move(s);
  table->g = std::move(g);
  table->dg = std::move(dg);
  return {[table](Scalar x) { return table->value(x); }, [table](Scalar x) { return table->slope(x); }};
}

/// Admissible open interval for the truncation exponent l.
template <class Scalar>
std::pair<Scalar, Scalar> ell_range(Scalar p, int dimension) {
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  const Scalar critical = p < dimension ? dimension * p / (dimension - p) : inf;
  if (p > 2) return {p, std::min(((p - 1) * (p - 1) + p - 2) / (p - 2), critical)};
  return {p, critical};
}

/// Midpoint of the admissible range, further capped by q in the power case.
template <class Scalar>
Scalar default_ell(const NonlinearitySpec<Scalar>& spec, int dimension) {
  auto [lo, hi] = ell_range(spec.p, dimension);
  if (spec.kind == SourceKind::power) hi = std::min(hi, spec.q);
  if (!std::isfinite(hi)) hi = lo + 2;
  return (lo + hi) / 2;
}

template <class Scalar = double>
struct AprioriConstants {
  Scalar delta = 0;
  Scalar M = 0;
  Scalar K_pm1 = 0;
  Scalar K_inf = std::numeric_limits<Scalar>::quiet_NaN();  // constructive bound, p >= 2 only
};

/// delta and M with f(s) >= (m+delta) s^{p-1} for s >= M, then the chain of
/// a-priori bounds. Without a given M the sampled M minimizing K_{p-1} is used,
/// restricted to M < M_max.
template <class Scalar>
AprioriConstants<Scalar> a_priori_constants(const NonlinearitySpec<Scalar>& spec, int dimension,
                                            std::optional<std::type_identity_t<Scalar>> M = std::nullopt,
                                            std::type_identity_t<Scalar> M_max = std::numeric_limits<Scalar>::infinity()) {
  using std::pow;
  const Scalar p = spec.p, m = spec.m;
  const Scalar omega = 2 * pow(std::numbers::pi_v<Scalar>, Scalar(dimension) / 2) / std::tgamma(Scalar(dimension) / 2);
  const Scalar ball = omega / dimension;
  auto ratio = [&](Scalar s) { return spec.f(s) / pow(s, p - 1); };
  auto k_pm1 = [&](Scalar delta, Scalar mm) {
    return pow((1 + m / delta) * pow(mm, p - 1) * ball, 1 / (p - 1));
  };

  AprioriConstants<Scalar> out;
  if (M) {
    if (!(*M > 0)) throw std::invalid_argument("a_priori_constants: M must be positive");
    Scalar worst = ratio(*M);
    for (Scalar s : detail::log_grid<Scalar>(*M, std::max<Scalar>(scan_cap, 2 * *M), 4000))
      worst = std::min(worst, ratio(s));
    out.delta = worst - m;
    out.M = *M;
    if (!(out.delta > 1e-12)) throw NoBracket("a_priori_constants: f(s) >= (m+delta) s^(p-1) fails for s >= M");
    out.K_pm1 = k_pm1(out.delta, out.M);
  } else {
    const auto grid = detail::log_grid<Scalar>(std::min<Scalar>(1e-3, spec.u0), Scalar(scan_cap), 4000);
    std::vector<Scalar> suffix(grid.size());
    Scalar run = std::numeric_limits<Scalar>::infinity();
    for (std::size_t i = grid.size(); i-- > 0;) {
      run = std::min(run, ratio(grid[i]));
      suffix[i] = run;
    }
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Scalar delta = suffix[i] - m;
      if (!(delta > 1e-12) || !(grid[i] < M_max)) continue;
      const Scalar k = k_pm1(delta, grid[i]);
      if (k < best) {
        best = k;
        out.delta = delta;
        out.M = grid[i];
        out.K_pm1 = k;
      }
    }
    if (!std::isfinite(best)) throw NoBracket("a_priori_constants: no (delta, M) pair below the scan cap");
  }
  if (p >= 2) {
    out.K_inf = 3 * pow(Scalar(2), dimension - 1) / omega * pow(ball, (p - 2) / (p - 1)) *
                pow(Scalar(2), 1 - 1 / (p - 1)) * pow(1 + m, 1 / (p - 1)) * out.K_pm1;
  }
  return out;
}

/// How s0 is certified: against the constructive K_inf, or a posteriori by
/// checking sup u < s0 on the computed solution.
enum class BoundPolicy { constructive, a_posteriori };

template <class Scalar = double>
struct TruncationParams {
  Scalar s0 = 2;
  Scalar ell = 3;
  AprioriConstants<Scalar> bounds;
  BoundPolicy policy = BoundPolicy::a_posteriori;
};

template <class Scalar = double>
class TruncatedNonlinearity {
 public:
  TruncatedNonlinearity(NonlinearitySpec<Scalar> base, int dimension, TruncationParams<Scalar> params)
      : base_(std::move(base)), params_(params) {
    const Scalar s0 = params_.s0, ell = params_.ell, p = base_.p;
    auto [lo, hi] = ell_range(p, dimension);
    if (!(ell > lo && ell < hi)) throw std::invalid_argument("truncation exponent l outside its admissible range");
    if (base_.kind == SourceKind::power && !(ell < base_.q))
      throw std::invalid_argument("truncation exponent l must be below q");
    if (!(s0 > params_.bounds.M)) throw std::invalid_argument("s0 must exceed M");
    if (params_.policy == BoundPolicy::constructive && !(s0 > params_.bounds.K_inf))
      throw std::invalid_argument("s0 must exceed K_inf");
    if (!(s0 > base_.u0)) throw std::invalid_argument("s0 must exceed u0");

    if (base_.kind == SourceKind::power) {
      const Scalar q = base_.q;
      coef_ = (q - 1) / (ell - 1) * std::pow(s0, q - ell);
      return;
    }

    // general f: cumulative quadrature on [0, s0] for the primitive
    const int panels = 512;
    panel_ = s0 / panels;
    cumulative_.assign(panels + 1, 0);
    for (int k = 0; k < panels; ++k)
      cumulative_[k + 1] = cumulative_[k] + gauss(k * panel_, (k + 1) * panel_);

    const Scalar md = base_.m + params_.bounds.delta;
    const Scalar f0 = base_.f(s0);
    const Scalar floor0 = md * std::pow(s0, p - 1);
    if (std::abs(f0 - floor0) <= 1e-12 * std::max<Scalar>(1, floor0)) {
      tangential_ = true;
      anchor_ = s0;
      anchor_value_ = f0;
      anchor_primitive_ = cumulative_.back();
      return;
    }
    // bridge on [s0, s1] by a monotone cubic Hermite; its end value is large
    // enough that both end slopes stay within the Fritsch-Carlson region
    width_ = Scalar(0.1) * s0;
    const Scalar s1 = s0 + width_;
    d0_ = base_.df(s0);
    d1_ = md * (p - 1) * std::pow(s1, p - 2);
    f0_ = f0;
    v1_ = std::max(f0 + width_ * std::max(d0_, d1_) / 2, md * std::pow(s1, p - 1));
    anchor_ = s1;
    anchor_value_ = v1_;
    anchor_primitive_ = cumulative_.back() + bridge_integral(1);
  }

  Scalar value(Scalar s) const {
    const Scalar s0 = params_.s0;
    if (s <= s0) return base_.f(s);
    if (base_.kind == SourceKind::power)
      return std::pow(s0, base_.q - 1) + coef_ * (std::pow(s, params_.ell - 1) - std::pow(s0, params_.ell - 1));
    if (!tangential_ && s < anchor_) {
      const Scalar t = (s - s0) / width_;
      return (2 * t * t * t - 3 * t * t + 1) * f0_ + (t * t * t - 2 * t * t + t) * width_ * d0_ +
             (-2 * t * t * t + 3 * t * t) * v1_ + (t * t * t - t * t) * width_ * d1_;
    }
    const Scalar md = base_.m + params_.bounds.delta, p = base_.p;
    return anchor_value_ + md * (std::pow(s, p - 1) - std::pow(anchor_, p - 1)) +
           std::pow(s - anchor_, params_.ell - 1);
  }

  Scalar slope(Scalar s) const {
    const Scalar s0 = params_.s0;
    if (s <= s0) return base_.df(s);
    if (base_.kind == SourceKind::power) return coef_ * (params_.ell - 1) * std::pow(s, params_.ell - 2);
    if (!tangential_ && s < anchor_) {
      const Scalar t = (s - s0) / width_;
      return ((6 * t * t - 6 * t) * f0_ + (3 * t * t - 4 * t + 1) * width_ * d0_ +
              (-6 * t * t + 6 * t) * v1_ + (3 * t * t - 2 * t) * width_ * d1_) /
             width_;
    }
    const Scalar md = base_.m + params_.bounds.delta, p = base_.p;
    const Scalar tail = s == anchor_ ? 0 : (params_.ell - 1) * std::pow(s - anchor_, params_.ell - 2);
    return md * (p - 1) * std::pow(s, p - 2) + tail;
  }

  /// F~(s) = int_0^s f~.
  Scalar primitive(Scalar s) const {
    const Scalar s0 = params_.s0;
    if (s <= 0) return base_.f(0) * s;
    if (base_.kind == SourceKind::power) {
      const Scalar q = base_.q, ell = params_.ell;
      if (s <= s0) return std::pow(s, q) / q;
      return std::pow(s0, q) / q + (std::pow(s0, q - 1) - coef_ * std::pow(s0, ell - 1)) * (s - s0) +
             coef_ * (std::pow(s, ell) - std::pow(s0, ell)) / ell;
    }
    if (s <= s0) {
      const int k = std::min(int(s / panel_), int(cumulative_.size()) - 2);
      return cumulative_[k] + gauss(k * panel_, s);
    }
    if (!tangential_ && s < anchor_) return cumulative_.back() + bridge_integral((s - s0) / width_);
    const Scalar md = base_.m + params_.bounds.delta, p = base_.p, a = anchor_;
    return anchor_primitive_ + anchor_value_ * (s - a) +
           md * ((std::pow(s, p) - std::pow(a, p)) / p - std::pow(a, p - 1) * (s - a)) +
           std::pow(s - a, params_.ell) / params_.ell;
  }

  const NonlinearitySpec<Scalar>& base() const { return base_; }
  const TruncationParams<Scalar>& params() const { return params_; }
  Scalar p() const { return base_.p; }
  Scalar m() const { return base_.m; }
  Scalar u0() const { return base_.u0; }
  Scalar s0() const { return params_.s0; }
  Scalar ell() const { return params_.ell; }
  bool tangential() const { return tangential_; }

 private:
  Scalar gauss(Scalar a, Scalar b) const {
    static constexpr double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                    0.9061798459386640};
    static constexpr double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                    0.4786286704993665, 0.2369268850561891};
    const Scalar mid = (a + b) / 2, half = (b - a) / 2;
    Scalar sum = 0;
    for (int i = 0; i < 5; ++i) sum += Scalar(w[i]) * base_.f(mid + half * Scalar(x[i]));
    return half * sum;
  }

  Scalar bridge_integral(Scalar t) const {
    const Scalar t2 = t * t, t3 = t2 * t, t4 = t3 * t;
    return width_ * ((t4 / 2 - t3 + t) * f0_ + (t4 / 4 - 2 * t3 / 3 + t2 / 2) * width_ * d0_ +
                     (-t4 / 2 + t3) * v1_ + (t4 / 4 - t3 / 3) * width_ * d1_);
  }

  NonlinearitySpec<Scalar> base_;
  TruncationParams<Scalar> params_;
  Scalar coef_ = 0;
  // general kind
  Scalar panel_ = 0;
  std::vector<Scalar> cumulative_;
  bool tangential_ = false;
  Scalar width_ = 0, f0_ = 0, d0_ = 0, d1_ = 0, v1_ = 0;
  Scalar anchor_ = 0, anchor_value_ = 0, anchor_primitive_ = 0;
};

template <class Scalar>
TruncatedNonlinearity<Scalar> truncate(NonlinearitySpec<Scalar> base, int dimension,
                                       TruncationParams<Scalar> params) {
  return TruncatedNonlinearity<Scalar>(std::move(base), dimension, params);
}

template <class Scalar = double>
struct ConeWindow {
  Scalar lower = 0;
  Scalar upper = std::numeric_limits<Scalar>::infinity();
};

/// Neighbouring roots of f~(t) = m t^{p-1} around u0.
template <class Scalar, class Reaction>
  requires ReactionTerm<Reaction, Scalar>
ConeWindow<Scalar> cone_window(const Reaction& f, Scalar m, Scalar p, Scalar u0) {
  auto gap = [&](Scalar t) { return f.value(t) - m * std::pow(t, p - 1); };
  const Scalar transversal = f.slope(u0) - m * (p - 1) * std::pow(u0, p - 2);
  if (std::abs(gap(u0)) > 1e-9 * std::max<Scalar>(1, m * std::pow(u0, p - 1)))
    throw std::invalid_argument("cone_window: u0 is not a root of f~(t) = m t^(p-1)");
  if (!(transversal > 1e-9 * std::max<Scalar>(1, std::abs(f.slope(u0)))))
    throw std::invalid_argument("cone_window: u0 is not an isolated upward crossing");

  ConeWindow<Scalar> out;
  const int steps = 4000;
  Scalar prev = u0;
  for (int k = 1; k < steps; ++k) {
    const Scalar t = u0 * (1 - Scalar(k) / steps);
    if (gap(t) >= 0) {
      out.lower = detail::bisect<Scalar>(gap, t, prev);
      break;
    }
    prev = t;
  }
  prev = u0;
  for (Scalar t : detail::log_grid<Scalar>(u0 * (1 + Scalar(1) / steps), std::max<Scalar>(scan_cap, 2 * u0), 8000)) {
    if (gap(t) <= 0) {
      out.upper = detail::bisect<Scalar>(gap, prev, t);
      break;
    }
    prev = t;
  }
  return out;
}

}  // namespace plap
