#pragma once

// Radial discretization of the unit ball B in R^N.
//
// A radial profile u(|x|) is sampled at uniform nodes r_i = i/n on [0,1].
// Node quantities are integrated with the exact moments of the hat functions
// against r^{N-1} dr (lumped mass), cell quantities with the exact cell
// measure. Every integral over B is omega * (radial integral), omega being the
// surface measure of the unit sphere S^{N-1}.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace plap {

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Surface measure of the unit sphere in R^N (2 for N = 1).
template <class Scalar = double>
Scalar sphere_measure(int dimension) {
  using std::pow;
  using std::tgamma;
  const Scalar half_n = Scalar(dimension) / 2;
  return 2 * pow(std::numbers::pi_v<Scalar>, half_n) / tgamma(half_n);
}

template <class Scalar = double>
class RadialGrid {
 public:
  using VectorType = Vector<Scalar>;

  RadialGrid(int dimension, int n_cells) : dimension_(dimension), n_cells_(n_cells) {
    if (dimension < 1) throw std::invalid_argument("dimension N must be >= 1");
    if (n_cells < 8) throw std::invalid_argument("n_cells must be >= 8");
    step_ = Scalar(1) / n_cells;
    nodes_ = VectorType::LinSpaced(n_cells + 1, Scalar(0), Scalar(1));
    node_weights_ = VectorType::Zero(n_cells + 1);
    cell_weights_.resize(n_cells);
    omega_ = sphere_measure<Scalar>(dimension);

    // Moments over [a, a+h] are expanded binomially in h so that cells near
    // r = 1 do not lose digits to cancellation.
    // With r = a + h t:
    //   int r^k dr            = h sum C(k,j) a^{k-j} h^j / (j+1)
    //   int t r^k dr          = h sum C(k,j) a^{k-j} h^j / (j+2)
    //   int (1-t) r^k dr      = h sum C(k,j) a^{k-j} h^j / ((j+1)(j+2))
    const int k = dimension - 1;
    for (int c = 0; c < n_cells; ++c) {
      const Scalar a = nodes_[c];
      Scalar cell = 0, left = 0, right = 0, binom = 1;
      for (int j = 0; j <= k; ++j) {
        const Scalar term = binom * std::pow(a, Scalar(k - j)) * std::pow(step_, Scalar(j));
        cell += term / (j + 1);
        right += term / (j + 2);
        left += term / ((j + 1) * (j + 2));
        binom = binom * (k - j) / (j + 1);
      }
      cell_weights_[c] = step_ * cell;
      node_weights_[c] += step_ * left;
      node_weights_[c + 1] += step_ * right;
    }
  }

  int dimension() const { return dimension_; }
  int n_cells() const { return n_cells_; }
  int n_nodes() const { return n_cells_ + 1; }
  Scalar step() const { return step_; }
  Scalar angular_factor() const { return omega_; }
  /// |B| = omega / N.
  Scalar volume() const { return omega_ / dimension_; }

  const VectorType& nodes() const { return nodes_; }
  /// w_i = int_0^1 hat_i(r) r^{N-1} dr; they sum to 1/N.
  const VectorType& node_weights() const { return node_weights_; }
  /// c_k = int_{r_k}^{r_{k+1}} r^{N-1} dr.
  const VectorType& cell_weights() const { return cell_weights_; }
  VectorType cell_midpoints() const {
    return (nodes_.head(n_cells_) + nodes_.tail(n_cells_)) / 2;
  }

 private:
  int dimension_;
  int n_cells_;
  Scalar step_;
  Scalar omega_;
  VectorType nodes_;
  VectorType node_weights_;
  VectorType cell_weights_;
};

template <class Scalar = double>
using GridPtr = std::shared_ptr<const RadialGrid<Scalar>>;

template <class Scalar = double>
GridPtr<Scalar> build_grid(int dimension, int n_cells) {
  return std::make_shared<const RadialGrid<Scalar>>(dimension, n_cells);
}

/// A sampled radial profile. `in_cone` records that the values are known to be
/// nonnegative and nondecreasing.
template <class Scalar = double>
struct RadialFunction {
  GridPtr<Scalar> grid;
  Vector<Scalar> values;
  bool in_cone = false;

  RadialFunction() = default;
  RadialFunction(GridPtr<Scalar> g, Vector<Scalar> v, bool cone = false)
      : grid(std::move(g)), values(std::move(v)), in_cone(cone) {
    if (grid && values.size() != grid->n_nodes())
      throw std::invalid_argument("RadialFunction: value count does not match grid");
    if (!values.allFinite()) throw std::invalid_argument("RadialFunction: non-finite value");
  }

  /// Samples `fn(r)` at every node.
  template <class Fn>
  static RadialFunction sample(GridPtr<Scalar> g, Fn&& fn) {
    Vector<Scalar> v(g->n_nodes());
    for (int i = 0; i < g->n_nodes(); ++i) v[i] = fn(g->nodes()[i]);
    return RadialFunction(std::move(g), std::move(v));
  }
};

namespace detail {
template <class Derived>
void check_nodes(const RadialGrid<typename Derived::Scalar>& grid,
                 const Eigen::MatrixBase<Derived>& u) {
  if (u.size() != grid.n_nodes()) throw std::invalid_argument("profile size does not match grid");
}
}  // namespace detail

/// omega * sum_i w_i phi_i, i.e. the integral over B of the radial function phi.
template <class Derived>
typename Derived::Scalar integrate(const RadialGrid<typename Derived::Scalar>& grid,
                                   const Eigen::MatrixBase<Derived>& phi) {
  detail::check_nodes(grid, phi);
  return grid.angular_factor() * grid.node_weights().dot(phi.derived());
}

/// Same for a cell-valued quantity, using the exact cell measure.
template <class Derived>
typename Derived::Scalar integrate_cells(const RadialGrid<typename Derived::Scalar>& grid,
                                         const Eigen::MatrixBase<Derived>& cell_values) {
  if (cell_values.size() != grid.n_cells())
    throw std::invalid_argument("cell profile size does not match grid");
  return grid.angular_factor() * grid.cell_weights().dot(cell_values.derived());
}

/// Forward differences (u_{i+1} - u_i)/h, one value per cell.
template <class Derived>
Vector<typename Derived::Scalar> derivative(const RadialGrid<typename Derived::Scalar>& grid,
                                            const Eigen::MatrixBase<Derived>& u) {
  detail::check_nodes(grid, u);
  const int n = grid.n_cells();
  return (u.tail(n) - u.head(n)) / grid.step();
}

/// Node slopes for export: mean of the adjacent cell slopes, one-sided at the ends.
template <class Derived>
Vector<typename Derived::Scalar> node_slopes(const RadialGrid<typename Derived::Scalar>& grid,
                                             const Eigen::MatrixBase<Derived>& u) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> d = derivative(grid, u);
  const int n = grid.n_cells();
  Vector<Scalar> s(n + 1);
  s[0] = d[0];
  s[n] = d[n - 1];
  if (n > 1) s.segment(1, n - 1) = (d.head(n - 1) + d.tail(n - 1)) / 2;
  return s;
}

/// (int_B |u'|^p + m |u|^p)^{1/p}.
template <class Derived>
typename Derived::Scalar w1p_norm(const RadialGrid<typename Derived::Scalar>& grid,
                                  const Eigen::MatrixBase<Derived>& u,
                                  typename Derived::Scalar p, typename Derived::Scalar m = 1) {
  using std::pow;
  using Scalar = typename Derived::Scalar;
  if (!(p > 1)) throw std::invalid_argument("w1p_norm: p must exceed 1");
  const Vector<Scalar> d = derivative(grid, u);
  const Scalar grad = integrate_cells(grid, d.array().abs().pow(p).matrix());
  const Scalar mass = integrate(grid, u.derived().array().abs().pow(p).matrix());
  return pow(grad + m * mass, Scalar(1) / p);
}

template <class Derived>
typename Derived::Scalar sup_norm(const Eigen::MatrixBase<Derived>& u) {
  return u.derived().cwiseAbs().maxCoeff();
}

template <class Derived>
typename Derived::Scalar lq_norm(const RadialGrid<typename Derived::Scalar>& grid,
                                 const Eigen::MatrixBase<Derived>& u,
                                 typename Derived::Scalar q) {
  using std::pow;
  using Scalar = typename Derived::Scalar;
  return pow(integrate(grid, u.derived().array().abs().pow(q).matrix()), Scalar(1) / q);
}

/// Weighted least-squares projection onto nondecreasing vectors with values in
/// [lower, upper]: pool adjacent violators, then clamp.
template <class Derived, class WeightDerived>
Vector<typename Derived::Scalar> project_monotone(const Eigen::MatrixBase<Derived>& values,
                                                  const Eigen::MatrixBase<WeightDerived>& weights,
                                                  typename Derived::Scalar lower,
                                                  typename Derived::Scalar upper) {
  using Scalar = typename Derived::Scalar;
  if (lower > upper) throw std::invalid_argument("project_monotone: lower > upper");
  if (values.size() != weights.size())
    throw std::invalid_argument("project_monotone: weight count mismatch");
  const Eigen::Index n = values.size();

  struct Block {
    Scalar mean;
    Scalar weight;
    Eigen::Index count;
  };
  std::vector<Block> blocks;
  blocks.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    blocks.push_back({values[i], weights[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      const Block top = blocks.back();
      blocks.pop_back();
      Block& prev = blocks.back();
      const Scalar w = prev.weight + top.weight;
      // zero-weight blocks pool to the plain average
      prev.mean = w > 0 ? (prev.mean * prev.weight + top.mean * top.weight) / w
                        : (prev.mean * prev.count + top.mean * top.count) / (prev.count + top.count);
      prev.weight = w;
      prev.count += top.count;
    }
  }

  Vector<Scalar> out(n);
  Eigen::Index pos = 0;
  for (const Block& b : blocks) {
    const Scalar v = std::clamp(b.mean, lower, upper);
    out.segment(pos, b.count).setConstant(v);
    pos += b.count;
  }
  return out;
}

/// Projection onto the cone window {u nondecreasing, lower <= u <= upper} in the
/// grid-weighted L^2 metric. Inputs already in the window are returned unchanged.
template <class Scalar>
RadialFunction<Scalar> project_cone(const RadialFunction<Scalar>& u, Scalar lower = 0,
                                    Scalar upper = std::numeric_limits<Scalar>::infinity()) {
  if (lower > upper) throw std::invalid_argument("project_cone: lower > upper");
  const auto& grid = *u.grid;
  bool inside = u.values.minCoeff() >= lower && u.values.maxCoeff() <= upper;
  for (int i = 0; inside && i < grid.n_cells(); ++i) inside = u.values[i] <= u.values[i + 1];
  if (inside) return RadialFunction<Scalar>(u.grid, u.values, true);
  return RadialFunction<Scalar>(u.grid,
                                project_monotone(u.values, grid.node_weights(), lower, upper), true);
}

/// Vector form used inside the solvers.
template <class Derived>
Vector<typename Derived::Scalar> project_cone(const RadialGrid<typename Derived::Scalar>& grid,
                                              const Eigen::MatrixBase<Derived>& u,
                                              typename Derived::Scalar lower,
                                              typename Derived::Scalar upper) {
  detail::check_nodes(grid, u);
  bool inside = u.minCoeff() >= lower && u.maxCoeff() <= upper;
  for (int i = 0; inside && i < grid.n_cells(); ++i) inside = u[i] <= u[i + 1];
  if (inside) return u;
  return project_monotone(u, grid.node_weights(), lower, upper);
}

/// True when u is nonnegative and nondecreasing up to `tol`.
template <class Derived>
bool is_in_cone(const Eigen::MatrixBase<Derived>& u, typename Derived::Scalar tol = 0) {
  if (u.minCoeff() < -tol) return false;
  for (Eigen::Index i = 0; i + 1 < u.size(); ++i)
    if (u[i + 1] < u[i] - tol) return false;
  return true;
}

/// Zero-mean (with respect to the grid measure) version of r^2.
template <class Scalar>
Vector<Scalar> centered_square(const RadialGrid<Scalar>& grid) {
  Vector<Scalar> v = grid.nodes().array().square().matrix();
  const Scalar mean = grid.node_weights().dot(v) / grid.node_weights().sum();
  v.array() -= mean;
  return v;
}

}  // namespace plap
