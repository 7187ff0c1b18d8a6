#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "plap/minimax.hpp"
#include "plap/shooting.hpp"

#include <cmath>
#include <random>

using namespace plap;

namespace {

TruncatedNonlinearity<double> power_trunc(double p, double q, int dim, double s0) {
  auto spec = power_law(p, q);
  TruncationParams<double> params;
  params.s0 = s0;
  params.ell = default_ell(spec, dim);
  params.bounds = a_priori_constants(spec, dim, std::nullopt, s0);
  return truncate(spec, dim, params);
}

Vector<double> random_positive_cone(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> unif(0, 1);
  Vector<double> u(n);
  double acc = 0.1 + unif(rng);
  for (int i = 0; i < n; ++i) u[i] = acc += unif(rng) / n;
  return u;
}

SolveResult<double> solve_power(double p, double q, int N, int n, double s0 = 4) {
  auto grid = build_grid(N, n);
  const auto f = power_trunc(p, q, N, s0);
  const Vector<double> v = centered_square(*grid);
  const RadialFunction<double> start(grid, (1 + 0.3 * v.array()).matrix(), true);
  return nehari_descent(start, f, 1.0, p, 1.0, Window<double>{0, INFINITY});
}

}  // namespace

TEST_CASE("nehari_h: closed form for a pure power") {
  // psi(t) = t^{p-1} ||u||^p - t^{q-1} int u^q, so h = (||u||^p / int u^q)^{1/(q-p)};
  // radial_norm_p leaves out omega, so the integral does too
  std::mt19937_64 rng(5);
  const double p = 3, q = 6;
  auto grid = build_grid(2, 128);
  const auto f = power_trunc(p, q, 2, 1e3);
  for (int k = 0; k < 10; ++k) {
    const Vector<double> u = random_positive_cone(rng, 129);
    const double norm = radial_norm_p(*grid, u, 1.0, p);
    const double uq = grid->node_weights().dot(u.array().pow(q).matrix());
    CHECK(nehari_h(*grid, u, f, 1.0, p) == doctest::Approx(std::pow(norm / uq, 1 / (q - p))).epsilon(1e-11));
  }
}

TEST_CASE("property: nehari_h scaling law along rays") {
  std::mt19937_64 rng(9);
  auto grid = build_grid(1, 256);
  const auto f = power_trunc(3, 6, 1, 4);
  for (int k = 0; k < 20; ++k) {
    const Vector<double> u = random_positive_cone(rng, 257) * 0.5;
    const double h = nehari_h(*grid, u, f, 1.0, 3.0);
    for (double c : {0.5, 2.0}) CHECK(std::abs(nehari_h(*grid, (c * u).eval(), f, 1.0, 3.0) * c - h) <= 1e-9 * h);
  }
}

TEST_CASE("nehari_h rejects a ray that never crosses") {
  struct Flat {
    double value(double) const { return 0; }
    double slope(double) const { return 0; }
    double primitive(double) const { return 0; }
  };
  auto grid = build_grid(1, 16);
  CHECK_THROWS_AS(nehari_h(*grid, Vector<double>::Ones(17), Flat{}, 1.0, 3.0), NoBracket);
}

TEST_CASE("descent finds the nonconstant solution for p = 3, q = 6") {
  const auto res = solve_power(3, 6, 1, 2048);
  REQUIRE(res.status == DescentStatus::converged);
  const auto& u = res.u.values;
  CHECK(res.residual <= 1e-8);
  CHECK(u[0] < 1);
  CHECK(u[u.size() - 1] > 1);
  CHECK(is_in_cone(u));

  // the shooting profile with the same center value is an independent oracle
  auto grid = res.u.grid;
  const auto f = power_trunc(3, 6, 1, 4);
  const auto shot = find_nonconstant(3.0, 1, f, 1.0, 1e-3, 1 - 1e-6, grid);
  CHECK((shot.u.values - u).cwiseAbs().maxCoeff() <= 1e-4);

  // level below the constant state, and maximal along its own ray
  const double e1 = energy(*grid, Vector<double>::Ones(u.size()).eval(), f, 1.0, 3.0);
  CHECK(res.level < e1);
  const auto ray = ray_max_check(*grid, u, f, 1.0, 3.0);
  CHECK(ray.ok);
  CHECK(std::abs(ray.argmax_t - 1) <= 0.011);
}

TEST_CASE("converged solutions lie on the Nehari set and are fixed by tilde_T") {
  const auto res = solve_power(3, 8, 2, 512);
  REQUIRE(res.status == DescentStatus::converged);
  const auto& g = *res.u.grid;
  const auto f = power_trunc(3, 8, 2, 4);
  const auto& u = res.u.values;
  const double gap = residual(g, u, f, 1.0, 3.0).dot(u) / g.angular_factor();
  CHECK(std::abs(gap) <= 1e-8 * radial_norm_p(g, u, 1.0, 3.0));
  CHECK((tilde_T(g, u, f, 1.0, 3.0) - u).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("p = 2 and q = 10: the descent collapses onto the constant") {
  const auto res = solve_power(2, 10, 1, 512);
  CHECK(res.status == DescentStatus::converged_to_constant);
  // I(1) = |B| (1/p - 1/q) with |B| = 2 for N = 1
  CHECK(res.level == doctest::Approx(2 * (1.0 / 2 - 1.0 / 10)).epsilon(1e-6));
}

TEST_CASE("a start on the constant state is reported as such") {
  auto grid = build_grid(1, 64);
  const auto f = power_trunc(3, 6, 1, 4);
  const RadialFunction<double> start(grid, Vector<double>::Ones(65), true);
  CHECK(nehari_descent(start, f, 1.0, 3.0, 1.0, Window<double>{}).status == DescentStatus::converged_to_constant);
}

TEST_CASE("descent rejects a start outside the window") {
  auto grid = build_grid(1, 32);
  const auto f = power_trunc(3, 6, 1, 4);
  Vector<double> down = Vector<double>::LinSpaced(33, 2, 1);
  CHECK_THROWS_AS(nehari_descent(RadialFunction<double>(grid, down, false), f, 1.0, 3.0, 1.0, Window<double>{}),
                  std::invalid_argument);
}

TEST_CASE("nonconstancy certificate: sign depends on p") {
  for (auto [p, q, sign] : {std::tuple{3.0, 6.0, -1}, {1.5, 3.0, 1}}) {
    auto grid = build_grid(1, 512);
    const auto f = power_trunc(p, q, 1, 4);
    const auto rep = nonconstancy_certificate(*grid, f, 1.0, p, 1.0, centered_square(*grid), {0.02, 0.05, 0.1}, 4.0);
    CHECK(rep.expected_sign == sign);
    CHECK(rep.sign_ok);
    for (const auto& e : rep.entries) CHECK(e.gap * sign > 0);
  }
}

TEST_CASE("certificate rejects a v without zero mean") {
  auto grid = build_grid(1, 64);
  const auto f = power_trunc(3, 6, 1, 4);
  CHECK_THROWS_AS(nonconstancy_certificate(*grid, f, 1.0, 3.0, 1.0, grid->nodes(), {0.1}, 4.0), std::invalid_argument);
}

TEST_CASE("euler flow: energy never increases and the window is kept") {
  std::mt19937_64 rng(21);
  auto grid = build_grid(1, 256);
  const auto f = power_trunc(3, 6, 1, 4);
  for (int k = 0; k < 3; ++k) {
    const Vector<double> start = 0.6 * random_positive_cone(rng, 257);
    const auto traj = euler_flow(*grid, start, f, 1.0, 3.0, Window<double>{0, INFINITY}, 0.2, 200);
    for (std::size_t j = 1; j < traj.energies.size(); ++j) CHECK(traj.energies[j] <= traj.energies[j - 1] + 1e-12);
    CHECK(is_in_cone(traj.final_state, 1e-12));
  }
}

TEST_CASE("euler flow refuses to start at a fixed point") {
  auto grid = build_grid(1, 64);
  const auto f = power_trunc(3, 6, 1, 4);
  CHECK_THROWS(euler_flow(*grid, Vector<double>::Ones(65).eval(), f, 1.0, 3.0, Window<double>{}, 1.0, 10));
}

TEST_CASE("mountain-pass geometry near the lower state") {
  // u_- = 0 for a pure power: the constant gap is |B| (tau^p/p - tau^q/q)
  auto grid = build_grid(2, 256);
  const auto f = power_trunc(3, 6, 2, 4);
  const double tau = 0.5;
  const auto s = mp_geometry_sample(*grid, f, 1.0, 3.0, 0.0, tau, 200, 1);
  const double ball = sphere_measure<double>(2) / 2;
  CHECK(s.constant_gap == doctest::Approx(ball * (std::pow(tau, 3) / 3 - std::pow(tau, 6) / 6)).epsilon(1e-12));
  CHECK(s.min_gap > 0);
  CHECK(s.samples == 200);
  const auto again = mp_geometry_sample(*grid, f, 1.0, 3.0, 0.0, tau, 200, 1);
  CHECK(again.min_gap == s.min_gap);
}

TEST_CASE("descent telemetry is monotone in energy") {
  auto grid = build_grid(1, 512);
  const auto f = power_trunc(3, 6, 1, 4);
  const RadialFunction<double> start(grid, (1 + 0.3 * centered_square(*grid).array()).matrix(), true);
  std::vector<DescentRecord> log;
  nehari_descent(start, f, 1.0, 3.0, 1.0, Window<double>{}, {}, [&](const DescentRecord& r) { log.push_back(r); });
  REQUIRE(log.size() > 2);
  for (std::size_t k = 1; k < log.size(); ++k)
    if (!log[k].polish) CHECK(log[k].energy <= log[k - 1].energy);
}
