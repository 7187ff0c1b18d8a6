#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "plap/nonlinearity.hpp"

#include <cmath>
#include <random>

using namespace plap;

namespace {

TruncatedNonlinearity<double> power_trunc(double p, double q, int dim, double s0, double ell) {
  auto spec = power_law(p, q);
  TruncationParams<double> params;
  params.s0 = s0;
  params.ell = ell;
  params.bounds = a_priori_constants(spec, dim, std::nullopt, s0);
  return truncate(spec, dim, params);
}

// Simpson's rule on [a, b] with many panels, as an independent primitive.
template <class Fn>
double simpson(Fn&& f, double a, double b, int panels = 20000) {
  const double h = (b - a) / panels;
  double sum = f(a) + f(b);
  for (int i = 1; i < panels; ++i) sum += (i % 2 ? 4 : 2) * f(a + i * h);
  return sum * h / 3;
}

}  // namespace

TEST_CASE("power law nonlinearity") {
  auto spec = power_law(3.0, 6.0);
  CHECK(spec.m == 1.0);
  CHECK(spec.shift_constant == 0.0);
  CHECK(spec.u0 == 1.0);
  CHECK_THROWS_WITH_AS(power_law(3.0, 2.0), "q must exceed p", std::invalid_argument);
  CHECK_THROWS_AS(power_law(1.0, 2.0), std::invalid_argument);
}

TEST_CASE("shift of a pure power is zero") {
  const double q = 6;
  Source<double> g{[q](double s) { return std::pow(s, q - 1); },
                   [q](double s) { return (q - 1) * std::pow(s, q - 2); }};
  auto spec = shift(g, 3.0, 4.0);
  CHECK(spec.shift_constant == 0.0);
  CHECK(spec.m == 1.0);
  CHECK(spec.u0 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("shift makes f nondecreasing") {
  const double p = 3, q = 6;
  Source<double> g{[=](double s) { return std::pow(s, q - 1) - 0.5 * std::pow(s, p - 1); },
                   [=](double s) { return (q - 1) * std::pow(s, q - 2) - 0.5 * (p - 1) * std::pow(s, p - 2); }};
  auto spec = shift(g, p, 4.0);
  CHECK(spec.shift_constant == doctest::Approx(0.55).epsilon(1e-9));
  CHECK(spec.m == doctest::Approx(1.55).epsilon(1e-9));
  // f = s^5 + 0.05 s^2 = 1.55 s^2  <=>  s^3 = 1.5
  CHECK(spec.u0 == doctest::Approx(std::cbrt(1.5)).epsilon(1e-12));
  double prev = spec.f(0);
  for (int i = 1; i <= 100000; ++i) {
    const double s = 4.0 * i / 100000;
    CHECK_MESSAGE(spec.f(s) >= prev, "s = " << s);
    prev = spec.f(s);
  }
}

TEST_CASE("shift rejects unbounded negative slope") {
  Source<double> g{[](double s) { return -std::log(s); }, [](double s) { return -1 / s; }};
  // -g'/((p-1)s^{p-2}) = 1/(2 s^2) for p = 3: grows past 1e12 near zero
  CHECK_THROWS_AS(shift(g, 3.0, 1e-2), NoBracket);
}

TEST_CASE("a-priori constants") {
  auto spec = power_law(3.0, 6.0);
  auto c = a_priori_constants(spec, 1, 2.0);
  // s^5 >= 2^3 s^2 for s >= 2
  CHECK(c.delta == doctest::Approx(std::pow(2.0, 3.0) - 1).epsilon(1e-12));
  CHECK(c.M == 2.0);

  // delta = 1, M = 2, N = 1: K^{2} = (1 + 1/1) 2^2 * 2 = 16
  NonlinearitySpec<double> lin = power_law(3.0, 6.0);
  lin.kind = SourceKind::general;
  lin.g = {[](double s) { return 2 * s * s; }, [](double s) { return 4 * s; }};
  auto k = a_priori_constants(lin, 1, 2.0);
  CHECK(k.delta == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(k.K_pm1 == doctest::Approx(4.0).epsilon(1e-12));

  NonlinearitySpec<double> flat = lin;
  flat.g = {[](double s) { return s * s; }, [](double s) { return 2 * s; }};
  CHECK_THROWS_AS(a_priori_constants(flat, 1, 2.0), NoBracket);
  CHECK_THROWS_AS(a_priori_constants(flat, 1), NoBracket);

  // the automatic choice minimizes K over M: for s^{q-1} it is M^{q-p} = (q-1)/(p-1)
  auto autoc = a_priori_constants(spec, 1);
  CHECK(autoc.M == doctest::Approx(std::pow(2.5, 1.0 / 3)).epsilon(1e-2));
  CHECK(autoc.K_inf > autoc.K_pm1);
}

TEST_CASE("ell range") {
  auto [lo, hi] = ell_range(3.0, 1);
  CHECK(lo == 3.0);
  CHECK(hi == doctest::Approx(5.0));
  auto [lo2, hi2] = ell_range(2.0, 3);
  CHECK(lo2 == 2.0);
  CHECK(hi2 == doctest::Approx(6.0));
  auto r3 = ell_range(1.5, 1);
  CHECK(std::isinf(r3.second));
  CHECK(default_ell(power_law(3.0, 6.0), 1) == doctest::Approx(4.0));
  CHECK(default_ell(power_law(2.0, 10.0), 1) == doctest::Approx(6.0));
}

TEST_CASE("pure power truncation junction") {
  auto f = power_trunc(3, 6, 1, 2, 4);
  CHECK(f.value(2.0) == doctest::Approx(32.0).epsilon(1e-15));
  CHECK(f.slope(2.0) == doctest::Approx(80.0).epsilon(1e-15));
  CHECK(f.slope(std::nextafter(2.0, 3.0)) == doctest::Approx(80.0).epsilon(1e-12));
  // the branch beyond s0: 32 + (5/3) 2^2 (s^3 - 8)
  const double s = 2.7;
  CHECK(f.value(s) == doctest::Approx(32 + 5.0 / 3 * 4 * (s * s * s - 8)).epsilon(1e-14));
  CHECK(std::abs(f.value(std::nextafter(2.0, 3.0)) - f.value(2.0)) <= 1e-12);
  for (double x : {0.1, 0.5, 1.0, 1.9}) CHECK(f.value(x) == doctest::Approx(std::pow(x, 5)).epsilon(1e-15));
}

TEST_CASE("pure power primitive") {
  auto f = power_trunc(3, 6, 1, 2, 4);
  CHECK(f.primitive(0.0) == 0.0);
  CHECK(f.primitive(1.5) == doctest::Approx(std::pow(1.5, 6) / 6).epsilon(1e-15));
  // symbolic antiderivative of 32 + (20/3)(s^3 - 8) on [2, 3]
  const double tail = 32 * 1 + 20.0 / 3 * ((81.0 - 16.0) / 4 - 8);
  CHECK(f.primitive(3.0) == doctest::Approx(64.0 / 6 + tail).epsilon(1e-14));
}

TEST_CASE("truncation parameter validation") {
  auto spec = power_law(3.0, 6.0);
  TruncationParams<double> params;
  params.s0 = 2;
  params.bounds = a_priori_constants(spec, 1, std::nullopt, 2.0);
  params.ell = 5.5;
  CHECK_THROWS_AS(truncate(spec, 1, params), std::invalid_argument);
  params.ell = 3.0;
  CHECK_THROWS_AS(truncate(spec, 1, params), std::invalid_argument);
  params.ell = 4;
  params.policy = BoundPolicy::constructive;
  CHECK_THROWS_AS(truncate(spec, 1, params), std::invalid_argument);  // s0 <= K_inf
  params.s0 = params.bounds.K_inf * 1.01;
  CHECK_NOTHROW(truncate(spec, 1, params));
}

TEST_CASE("truncation invariants, power kind") {
  std::mt19937_64 rng(21);
  for (auto [p, q, dim] : {std::tuple{3.0, 6.0, 1}, {2.0, 10.0, 1}, {1.5, 3.0, 1}, {3.0, 8.0, 2}, {2.5, 7.0, 3}}) {
    const double s0 = 2.5;
    auto spec = power_law(p, q);
    const double ell = default_ell(spec, dim);
    auto f = power_trunc(p, q, dim, s0, ell);
    const auto& bounds = f.params().bounds;

    double prev = f.value(0);
    for (int i = 1; i <= 20000; ++i) {
      const double s = 4 * s0 * i / 20000;
      CHECK(f.value(s) >= prev);
      prev = f.value(s);
      if (s >= bounds.M) CHECK(f.value(s) >= (1 + bounds.delta) * std::pow(s, p - 1) * (1 - 1e-12));
    }
    CHECK(std::abs(f.slope(s0) - f.slope(std::nextafter(s0, 10.0))) <= 1e-10 * f.slope(s0));
    // f~(s)/s^{l-1} tends to a positive constant
    const double a = f.value(1e6) / std::pow(1e6, ell - 1), b = f.value(1e7) / std::pow(1e7, ell - 1);
    CHECK(a > 0);
    CHECK(std::abs(a - b) <= 1e-3 * a);

    // t -> f~(ts)/t^{p-1} strictly increasing
    for (double s : {0.5, 1.0, 3 * s0}) {
      double last = 0;
      for (int k = 1; k <= 400; ++k) {
        const double t = 0.01 * k;
        const double v = f.value(t * s) / std::pow(t, p - 1);
        if (k > 1) CHECK(v > last);
        last = v;
      }
    }

    // F~' = f~ at random points
    std::uniform_real_distribution<double> unif(0.05, 3 * s0);
    for (int k = 0; k < 100; ++k) {
      const double s = unif(rng), h = 1e-5 * s;
      const double fd = (f.primitive(s + h) - f.primitive(s - h)) / (2 * h);
      CHECK(std::abs(fd - f.value(s)) <= 1e-6 * (1 + f.value(s)));
    }
  }
}

TEST_CASE("truncation of a general f with the Hermite bridge") {
  const double p = 3, q = 6;
  Source<double> g{[=](double s) { return std::pow(s, q - 1) - 0.5 * std::pow(s, p - 1); },
                   [=](double s) { return (q - 1) * std::pow(s, q - 2) - 0.5 * (p - 1) * std::pow(s, p - 2); }};
  auto spec = shift(g, p, 100.0);
  TruncationParams<double> params;
  params.s0 = 2;
  params.ell = 4;
  params.bounds = a_priori_constants(spec, 1, std::nullopt, 2.0);
  auto f = truncate(spec, 1, params);
  CHECK_FALSE(f.tangential());

  for (double s : {0.3, 1.0, 1.99}) CHECK(f.value(s) == doctest::Approx(spec.f(s)).epsilon(1e-15));
  // C^1 at s0 and at the end of the bridge
  for (double knot : {2.0, 2.2}) {
    const double up = std::nextafter(knot, 10.0), down = std::nextafter(knot, 0.0);
    CHECK(std::abs(f.value(up) - f.value(down)) <= 1e-10 * f.value(knot));
    CHECK(std::abs(f.slope(up) - f.slope(down)) <= 1e-8 * f.slope(knot));
  }
  double prev = f.value(0);
  for (int i = 1; i <= 40000; ++i) {
    const double s = 8.0 * i / 40000;
    CHECK(f.value(s) >= prev);
    prev = f.value(s);
  }
  for (double s : {0.5, 1.7, 2.0, 2.1, 2.2, 3.0, 7.5}) {
    const double oracle = simpson([&](double x) { return f.value(x); }, 0.0, s);
    CHECK(f.primitive(s) == doctest::Approx(oracle).epsilon(1e-10));
  }
}

TEST_CASE("tabulated source reproduces a cubic") {
  std::vector<double> s, g, dg;
  for (int i = 0; i <= 20; ++i) {
    const double x = 0.25 * i;
    s.push_back(x);
    g.push_back(x * x * x);
    dg.push_back(3 * x * x);
  }
  auto src = table_source(s, g, dg);
  for (double x : {0.1, 1.33, 4.9}) {
    CHECK(src.value(x) == doctest::Approx(x * x * x).epsilon(1e-12));
    CHECK(src.slope(x) == doctest::Approx(3 * x * x).epsilon(1e-12));
  }
  // power-law continuation past the table keeps value and slope
  CHECK(src.value(10.0) == doctest::Approx(1000.0).epsilon(1e-12));
  CHECK_THROWS_AS(table_source<double>({0.0}, {0.0}, {0.0}), std::invalid_argument);
}

TEST_CASE("cone window") {
  auto f = power_trunc(3, 6, 1, 2, 4);
  auto win = cone_window(f, 1.0, 3.0, 1.0);
  CHECK(win.lower == 0.0);
  CHECK(std::isinf(win.upper));

  // t^{p-1}(1 - (t-1/2)(t-1)(t-2)) crosses t^{p-1} at 1/2, 1 and 2
  struct Toy {
    double value(double t) const { return t * t * (1 - (t - 0.5) * (t - 1) * (t - 2)); }
    double slope(double t) const {
      const double k = 1 - (t - 0.5) * (t - 1) * (t - 2);
      const double dk = -((t - 1) * (t - 2) + (t - 0.5) * (t - 2) + (t - 0.5) * (t - 1));
      return 2 * t * k + t * t * dk;
    }
    double primitive(double) const { return 0; }
  };
  auto toy = cone_window(Toy{}, 1.0, 3.0, 1.0);
  CHECK(toy.lower == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(toy.upper == doctest::Approx(2.0).epsilon(1e-12));
  // a dense scan agrees on the sign pattern
  for (int i = 1; i < 1000; ++i) {
    const double t = 0.5 + 1.5 * i / 1000;
    if (std::abs(t - 1) < 1e-9) continue;
    const double gap = Toy{}.value(t) - t * t;
    CHECK((gap < 0) == (t < 1));
  }

  struct Tangent {
    double value(double t) const { return t * t + (t - 1) * (t - 1) * (t - 1); }
    double slope(double t) const { return 2 * t + 3 * (t - 1) * (t - 1); }
    double primitive(double) const { return 0; }
  };
  CHECK_THROWS_AS(cone_window(Tangent{}, 1.0, 3.0, 1.0), std::invalid_argument);
}
