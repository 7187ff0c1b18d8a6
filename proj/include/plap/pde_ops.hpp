#pragma once

// Discrete energy, its gradient (the weak-form residual) and the inner solver
// for the operators T and T~.
//
//   I(u) = omega [ sum_k c_k |d_k|^p / p + sum_i w_i (m |u_i|^p / p - F~(u_i)) ]
//
// with d_k the cell slopes, c_k the cell measures and w_i the lumped node
// weights of radial_core.

#include "plap/errors.hpp"
#include "plap/nonlinearity.hpp"
#include "plap/radial_core.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>

namespace plap {

template <class Scalar = double>
struct EnergyReport {
  Scalar value = 0;
  Scalar residual_norm = 0;
  Vector<Scalar> gradient;
};

struct InnerSolverConfig {
  double eps_reg = 1e-4;
  double eps_min = 1e-12;
  double continuation_factor = 0.1;
  double newton_tol = 1e-13;
  int max_iter = 200;  // per continuation stage
};

struct InnerStats {
  int iterations = 0;
  int stages = 0;
  double last_step = 0;
};

namespace detail {

template <class Scalar>
Scalar signed_pow(Scalar x, Scalar e) {
  return x == 0 ? Scalar(0) : std::copysign(std::pow(std::abs(x), e), x);
}

/// Solves a symmetric tridiagonal system (diag, off) x = rhs without pivoting.
template <class Scalar>
Vector<Scalar> solve_tridiagonal(const Vector<Scalar>& diag, const Vector<Scalar>& off, const Vector<Scalar>& rhs) {
  const Eigen::Index n = diag.size();
  Vector<Scalar> c(n), d(n);
  Scalar denom = diag[0];
  c[0] = n > 1 ? off[0] / denom : 0;
  d[0] = rhs[0] / denom;
  for (Eigen::Index i = 1; i < n; ++i) {
    denom = diag[i] - off[i - 1] * c[i - 1];
    c[i] = i + 1 < n ? off[i] / denom : 0;
    d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
  }
  for (Eigen::Index i = n - 1; i-- > 0;) d[i] -= c[i] * d[i + 1];
  return d;
}

}  // namespace detail

template <class Derived, class Reaction>
typename Derived::Scalar energy(const RadialGrid<typename Derived::Scalar>& grid,
                                const Eigen::MatrixBase<Derived>& u, const Reaction& f,
                                typename Derived::Scalar m, typename Derived::Scalar p) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> d = derivative(grid, u);
  Scalar grad = 0, bulk = 0;
  for (Eigen::Index k = 0; k < d.size(); ++k) grad += grid.cell_weights()[k] * std::pow(std::abs(d[k]), p);
  for (Eigen::Index i = 0; i < u.size(); ++i)
    bulk += grid.node_weights()[i] * (m * std::pow(std::abs(u[i]), p) / p - f.primitive(u[i]));
  return grid.angular_factor() * (grad / p + bulk);
}

/// R_i = I'(u)[hat_i]; Neumann conditions are natural.
template <class Derived, class Reaction>
Vector<typename Derived::Scalar> residual(const RadialGrid<typename Derived::Scalar>& grid,
                                          const Eigen::MatrixBase<Derived>& u, const Reaction& f,
                                          typename Derived::Scalar m, typename Derived::Scalar p) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> d = derivative(grid, u);
  const Scalar h = grid.step();
  const auto& c = grid.cell_weights();
  const auto& w = grid.node_weights();
  Vector<Scalar> r(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i)
    r[i] = w[i] * (m * detail::signed_pow(Scalar(u[i]), p - 1) - f.value(u[i]));
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    const Scalar flux = c[k] * detail::signed_pow(d[k], p - 1) / h;
    r[k] -= flux;
    r[k + 1] += flux;
  }
  return grid.angular_factor() * r;
}

/// Mass-scaled Euclidean norm of the residual: a computable stand-in for the
/// dual norm of I'(u), approximating the L^2 norm of the strong residual.
template <class Derived>
typename Derived::Scalar residual_norm(const RadialGrid<typename Derived::Scalar>& grid,
                                       const Eigen::MatrixBase<Derived>& r) {
  return std::sqrt((r.derived().array().square() / (grid.angular_factor() * grid.node_weights().array())).sum());
}

/// Rounding noise of residual_norm at u: each slope carries an error of about
/// eps (|u_k| + |u_{k+1}|) / h, which the flux difference amplifies by 1/h. On
/// fine grids this floor exceeds tight tolerances.
template <class Derived, class Reaction>
typename Derived::Scalar residual_floor(const RadialGrid<typename Derived::Scalar>& grid,
                                        const Eigen::MatrixBase<Derived>& u, const Reaction& f,
                                        typename Derived::Scalar m, typename Derived::Scalar p) {
  using Scalar = typename Derived::Scalar;
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Vector<Scalar> d = derivative(grid, u);
  const Scalar h = grid.step();
  const auto& c = grid.cell_weights();
  const auto& w = grid.node_weights();
  Vector<Scalar> a(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i)
    a[i] = eps * w[i] * (m * std::pow(std::abs(Scalar(u[i])), p - 1) + std::abs(f.value(u[i])));
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    const Scalar dd = eps * (std::abs(Scalar(u[k])) + std::abs(Scalar(u[k + 1]))) / h;
    const Scalar x = std::abs(d[k]);
    const Scalar noise = c[k] / h * (std::pow(x + dd, p - 1) - std::pow(x, p - 1) + eps * std::pow(x, p - 1));
    a[k] += noise;
    a[k + 1] += noise;
  }
  return residual_norm(grid, (grid.angular_factor() * a).eval());
}

template <class Derived, class Reaction>
EnergyReport<typename Derived::Scalar> energy_report(const RadialGrid<typename Derived::Scalar>& grid,
                                                     const Eigen::MatrixBase<Derived>& u, const Reaction& f,
                                                     typename Derived::Scalar m, typename Derived::Scalar p) {
  EnergyReport<typename Derived::Scalar> out;
  out.value = energy(grid, u, f, m, p);
  out.gradient = residual(grid, u, f, m, p);
  out.residual_norm = residual_norm(grid, out.gradient);
  return out;
}

/// Jacobian of `residual`. The |x|^{p-2} factor is smoothed at 1e-10 for p < 2.
template <class Derived, class Reaction>
Eigen::SparseMatrix<typename Derived::Scalar> jacobian(const RadialGrid<typename Derived::Scalar>& grid,
                                                       const Eigen::MatrixBase<Derived>& u, const Reaction& f,
                                                       typename Derived::Scalar m, typename Derived::Scalar p) {
  using Scalar = typename Derived::Scalar;
  const Scalar eps = p < 2 ? Scalar(1e-10) : Scalar(0);
  auto dphi = [&](Scalar x) { return (p - 1) * std::pow(x * x + eps * eps, (p - 2) / 2); };
  const Vector<Scalar> d = derivative(grid, u);
  const Scalar h = grid.step(), omega = grid.angular_factor();
  const auto& c = grid.cell_weights();
  const auto& w = grid.node_weights();
  std::vector<Eigen::Triplet<Scalar>> entries;
  entries.reserve(3 * u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i)
    entries.emplace_back(i, i, omega * w[i] * (m * dphi(u[i]) - f.slope(u[i])));
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    const Scalar a = omega * c[k] * dphi(d[k]) / (h * h);
    entries.emplace_back(k, k, a);
    entries.emplace_back(k + 1, k + 1, a);
    entries.emplace_back(k, k + 1, -a);
    entries.emplace_back(k + 1, k, -a);
  }
  Eigen::SparseMatrix<Scalar> jac(u.size(), u.size());
  jac.setFromTriplets(entries.begin(), entries.end());
  return jac;
}

/// The convex part's Hessian ((x^2+eps^2)-smoothed), as (diag, off) of a
/// symmetric tridiagonal matrix without the omega factor.
template <class Derived>
std::pair<Vector<typename Derived::Scalar>, Vector<typename Derived::Scalar>> convex_hessian(
    const RadialGrid<typename Derived::Scalar>& grid, const Eigen::MatrixBase<Derived>& v,
    typename Derived::Scalar m, typename Derived::Scalar p, typename Derived::Scalar eps) {
  using Scalar = typename Derived::Scalar;
  auto curv = [&](Scalar x) {
    return std::pow(x * x + eps * eps, (p - 4) / 2) * ((p - 1) * x * x + eps * eps);
  };
  const Vector<Scalar> d = derivative(grid, v);
  const Scalar h2 = grid.step() * grid.step();
  const auto& c = grid.cell_weights();
  const auto& w = grid.node_weights();
  Vector<Scalar> diag(v.size()), off(d.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) diag[i] = m * w[i] * curv(v[i]);
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    const Scalar a = c[k] * curv(d[k]) / h2;
    diag[k] += a;
    diag[k + 1] += a;
    off[k] = -a;
  }
  return {diag, off};
}

/// v = T(b): the minimizer of ||v||^p/p - int b v, i.e. the discrete weak
/// solution of -Delta_p v + m |v|^{p-2} v = b with Neumann conditions.
/// `guess` warm-starts the Newton iteration.
template <class Derived>
Vector<typename Derived::Scalar> solve_T(const RadialGrid<typename Derived::Scalar>& grid,
                                         const Eigen::MatrixBase<Derived>& b, typename Derived::Scalar m,
                                         typename Derived::Scalar p, const InnerSolverConfig& cfg = {},
                                         const Vector<typename Derived::Scalar>* guess = nullptr,
                                         InnerStats* stats = nullptr) {
  using Scalar = typename Derived::Scalar;
  detail::check_nodes(grid, b);
  if (!b.allFinite()) throw std::invalid_argument("solve_T: non-finite right-hand side");
  if (!(cfg.eps_reg >= cfg.eps_min && cfg.eps_min > 0))
    throw std::invalid_argument("solve_T: need eps_reg >= eps_min > 0");
  const Scalar h = grid.step();
  const auto& c = grid.cell_weights();
  const auto& w = grid.node_weights();
  const Vector<Scalar> wb = w.cwiseProduct(b.derived());

  Vector<Scalar> v;
  if (guess) {
    v = *guess;
  } else {
    // the constant solving the mean equation
    const Scalar mean = w.dot(b.derived()) / (w.sum() * m);
    v = Vector<Scalar>::Constant(grid.n_nodes(), detail::signed_pow(mean, 1 / (p - 1)));
  }

  InnerStats local;
  Scalar eps = cfg.eps_reg;
  for (;;) {
    const bool final_stage = eps <= cfg.eps_min * (1 + 1e-9);
    auto big = [&](Scalar x) { return (std::pow(x * x + eps * eps, p / 2) - std::pow(eps, p)) / p; };
    auto small = [&](Scalar x) { return std::pow(x * x + eps * eps, (p - 2) / 2) * x; };
    auto objective = [&](const Vector<Scalar>& x) {
      const Vector<Scalar> d = derivative(grid, x);
      Scalar sum = 0;
      for (Eigen::Index k = 0; k < d.size(); ++k) sum += c[k] * big(d[k]);
      for (Eigen::Index i = 0; i < x.size(); ++i) sum += m * w[i] * big(x[i]) - wb[i] * x[i];
      return sum;
    };
    auto gradient = [&](const Vector<Scalar>& x) {
      const Vector<Scalar> d = derivative(grid, x);
      Vector<Scalar> g(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) g[i] = m * w[i] * small(x[i]) - wb[i];
      for (Eigen::Index k = 0; k < d.size(); ++k) {
        const Scalar flux = c[k] * small(d[k]) / h;
        g[k] -= flux;
        g[k + 1] += flux;
      }
      return g;
    };

    bool converged = false;
    Scalar value = objective(v);
    for (int it = 0; it < cfg.max_iter; ++it) {
      ++local.iterations;
      const Vector<Scalar> g = gradient(v);
      auto [diag, off] = convex_hessian(grid, v, m, p, eps);
      const Vector<Scalar> step = detail::solve_tridiagonal<Scalar>(diag, off, -g);
      const Scalar size = step.cwiseAbs().maxCoeff();
      local.last_step = double(size);
      if (!std::isfinite(size)) break;
      if (size <= cfg.newton_tol * (1 + v.cwiseAbs().maxCoeff())) {
        v += step;
        converged = true;
        break;
      }
      const Scalar slope = g.dot(step);
      const Scalar slack = 1e-14 * (1 + std::abs(value));
      Scalar t = 1;
      Vector<Scalar> trial;
      Scalar trial_value = 0;
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt, t /= 2) {
        trial = v + t * step;
        trial_value = objective(trial);
        if (trial_value <= value + 1e-4 * t * slope + slack) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        // no further decrease representable at this eps
        converged = size <= 1e-8 * (1 + v.cwiseAbs().maxCoeff());
        break;
      }
      v = trial;
      value = trial_value;
    }
    ++local.stages;
    if (final_stage) {
      if (stats) *stats = local;
      if (!converged)
        throw NonConvergence("solve_T: Newton iteration did not converge", local.last_step);
      return v;
    }
    eps = std::max<Scalar>(eps * cfg.continuation_factor, cfg.eps_min);
  }
}

template <class Scalar>
RadialFunction<Scalar> solve_T(const RadialFunction<Scalar>& b, Scalar m, Scalar p,
                               const InnerSolverConfig& cfg = {}) {
  return RadialFunction<Scalar>(b.grid, solve_T(*b.grid, b.values, m, p, cfg));
}

/// T~(u) = T(f~(u)), warm-started from u.
template <class Derived, class Reaction>
Vector<typename Derived::Scalar> tilde_T(const RadialGrid<typename Derived::Scalar>& grid,
                                         const Eigen::MatrixBase<Derived>& u, const Reaction& f,
                                         typename Derived::Scalar m, typename Derived::Scalar p,
                                         const InnerSolverConfig& cfg = {}, InnerStats* stats = nullptr) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> b(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) b[i] = f.value(u[i]);
  const Vector<Scalar> start = u;
  return solve_T(grid, b, m, p, cfg, &start, stats);
}

template <class Scalar, class Reaction>
RadialFunction<Scalar> tilde_T(const RadialFunction<Scalar>& u, const Reaction& f, Scalar m, Scalar p,
                               const InnerSolverConfig& cfg = {}) {
  return RadialFunction<Scalar>(u.grid, tilde_T(*u.grid, u.values, f, m, p, cfg));
}

}  // namespace plap
