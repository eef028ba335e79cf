#include "fracstein/processes.hpp"
#include "fracstein/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace fracstein;

namespace {

struct Moments {
  double mean = 0.0, var = 0.0, mean_se = 0.0, var_se = 0.0;
};

Moments moments(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  Moments m;
  for (double v : x) m.mean += v;
  m.mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = (v - m.mean) * (v - m.mean);
    m2 += d;
    m4 += d * d;
  }
  m.var = m2 / (n - 1.0);
  m.mean_se = std::sqrt(m.var / n);
  m.var_se = std::sqrt((m4 / n - m.var * m.var) / n);
  return m;
}

}  // namespace

TEST_CASE("uniform grid") {
  const TimeGrid g = make_uniform_grid(1.0, 4);
  REQUIRE(g.size() == 5);
  for (int k = 0; k <= 4; ++k) CHECK(g.node(k) == doctest::Approx(0.25 * k));
  CHECK(g.horizon() == 1.0);
  const TimeGrid h = make_uniform_grid(2.0, 2);
  CHECK(h.node(1) == 1.0);
  CHECK(h.node(2) == 2.0);
  CHECK_THROWS_AS(make_uniform_grid(1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_uniform_grid(0.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(make_uniform_grid(-1.0, 4), std::invalid_argument);
}

TEST_CASE("grid invariants") {
  Vector bad(3);
  bad << 0.0, 0.5, 0.5;
  CHECK_THROWS_AS(TimeGrid{bad}, std::invalid_argument);
  bad << 0.1, 0.5, 1.0;
  CHECK_THROWS_AS(TimeGrid{bad}, std::invalid_argument);
  Vector ok(4);
  ok << 0.0, 0.1, 0.5, 1.0;
  const TimeGrid g(ok);
  CHECK(g.width(1) == doctest::Approx(0.4));
  CHECK(g.find_node(0.5).value() == 2);
  CHECK_FALSE(g.find_node(0.3).has_value());
}

TEST_CASE("brownian motion: variance, covariance, independence") {
  const TimeGrid g = make_uniform_grid(1.0, 4);
  const int n = 100000;
  std::vector<double> x1(n), xh(n), prod(n), inc_prod(n);
  for (int r = 0; r < n; ++r) {
    Engine e(11, r);
    const RealPath p = simulate_bm(g, e);
    CHECK(p.values(0) == 0.0);
    x1[r] = p.values(4);
    xh[r] = p.values(2);
    prod[r] = p.values(2) * p.values(4);
    inc_prod[r] = (p.values(1) - p.values(0)) * (p.values(4) - p.values(3));
  }
  const Moments m1 = moments(x1);
  CHECK(std::abs(m1.var - 1.0) <= 3.0 * m1.var_se);
  const Moments c = moments(prod);
  CHECK(std::abs(c.mean - 0.5) <= 3.0 * c.mean_se);
  const Moments inc = moments(inc_prod);
  CHECK(std::abs(inc.mean) <= 3.0 * inc.mean_se);
}

TEST_CASE("brownian motion is deterministic per stream") {
  const TimeGrid g = make_uniform_grid(1.0, 64);
  Engine a(5, 3), b(5, 3);
  CHECK(simulate_bm(g, a).values == simulate_bm(g, b).values);
}

TEST_CASE("shift by drift") {
  const TimeGrid g = make_uniform_grid(1.0, 8);
  Engine e(1, 0);
  const RealPath p = simulate_bm(g, e);
  CHECK(shift_by_drift(p, DriftSpec::zero()).values == p.values);
  const RealPath zero{g, Vector::Zero(g.size())};
  const RealPath shifted = shift_by_drift(zero, DriftSpec::linear(1.0));
  for (Index k = 0; k < g.size(); ++k) CHECK(shifted.values(k) == doctest::Approx(g.node(k)));

  const RealPath wrong{g, Vector::Zero(3)};
  CHECK_THROWS_AS(shift_by_drift(wrong, DriftSpec::zero()), std::invalid_argument);

  const int n = 100000;
  std::vector<double> xt(n);
  for (int r = 0; r < n; ++r) {
    Engine en(2, r);
    xt[r] = shift_by_drift(simulate_bm(g, en), DriftSpec::linear(0.5)).values(8);
  }
  const Moments m = moments(xt);
  CHECK(std::abs(m.mean - 0.5) <= 3.0 * m.mean_se);
}

TEST_CASE("drift primitives") {
  const DriftSpec affine = DriftSpec::affine_rate(1.0, 2.0);
  CHECK(affine.value(0.0) == 0.0);
  CHECK(affine.value(0.5) == doctest::Approx(0.75));
  CHECK(affine.rate(0.5) == doctest::Approx(2.0));
  const DriftSpec sine = DriftSpec::sine(0.5, 3.0);
  CHECK(sine.value(0.2) == doctest::Approx(0.5 * std::sin(0.6)));
  CHECK(sine.rate(0.2) == doctest::Approx(1.5 * std::cos(0.6)));

  const TimeGrid g = make_uniform_grid(1.0, 4);
  Vector rates(5);
  rates << 0.0, 1.0, 2.0, 3.0, 4.0;  // u'(t) = 4t, u(t) = 2t^2, exact for the linear interpolant
  const DriftSpec sampled = DriftSpec::sampled(g, rates);
  CHECK(sampled.value(1.0) == doctest::Approx(2.0));
  CHECK(sampled.value(0.375) == doctest::Approx(2.0 * 0.375 * 0.375));
  CHECK(sampled.rate(0.375) == doctest::Approx(1.5));
  CHECK(DriftSpec::zero().is_zero());
  CHECK_FALSE(affine.is_zero());
}

TEST_CASE("gaussian girsanov weight") {
  const TimeGrid g = make_uniform_grid(1.0, 512);
  Engine e(1, 0);
  CHECK(girsanov_weight_gaussian(simulate_bm(g, e), DriftSpec::zero()) == 1.0);

  // Zero path: exp(-1/2 sum u'(tau_{k-1})^2 dtau).
  const RealPath zero{g, Vector::Zero(g.size())};
  CHECK(girsanov_weight_gaussian(zero, DriftSpec::linear(1.0)) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  const double w = girsanov_weight_gaussian(zero, DriftSpec::affine_rate(0.0, 1.0));
  CHECK(w == doctest::Approx(std::exp(-1.0 / 6.0)).epsilon(2e-3));
  const TimeGrid fine = make_uniform_grid(1.0, 1 << 14);
  const RealPath zero_fine{fine, Vector::Zero(fine.size())};
  CHECK(girsanov_weight_gaussian(zero_fine, DriftSpec::affine_rate(0.0, 1.0)) ==
        doctest::Approx(std::exp(-1.0 / 6.0)).epsilon(1e-4));
}

TEST_CASE("gaussian girsanov weight has mean one") {
  const TimeGrid g = make_uniform_grid(1.0, 512);
  for (const DriftSpec& u : {DriftSpec::linear(1.0), DriftSpec::sine(0.2, 2.0 * std::numbers::pi)}) {
    const int n = 100000;
    std::vector<double> w(n);
    for (int r = 0; r < n; ++r) {
      Engine e(21, r);
      w[r] = girsanov_weight_gaussian(simulate_bm(g, e), u);
    }
    const Moments m = moments(w);
    CHECK(std::abs(m.mean - 1.0) <= 3.0 * m.mean_se);
  }
}

TEST_CASE("counting path") {
  const TimeGrid g = make_uniform_grid(1.0, 4);
  const CountingPath p(g, {0.1, 0.25, 0.6, 1.0});
  const Vector c = p.counts();
  CHECK(c(0) == 0.0);
  CHECK(c(1) == 2.0);  // jump at a node is counted there
  CHECK(c(2) == 2.0);
  CHECK(c(3) == 3.0);
  CHECK(c(4) == 4.0);
  CHECK_THROWS_AS(CountingPath(g, {0.0}), std::invalid_argument);
  CHECK_THROWS_AS(CountingPath(g, {0.5, 0.4}), std::invalid_argument);
  CHECK_THROWS_AS(CountingPath(g, {1.5}), std::invalid_argument);
}

TEST_CASE("poisson counts: mean and variance") {
  const TimeGrid g = make_uniform_grid(1.0, 16);
  const int n = 100000;
  std::vector<double> count(n);
  for (int r = 0; r < n; ++r) {
    Engine e(31, r);
    count[r] = simulate_cox(g, IntensitySpec::deterministic(2.0), e).path.counts()(16);
  }
  const Moments m = moments(count);
  CHECK(std::abs(m.mean - 2.0) <= 3.0 * m.mean_se);
  CHECK(std::abs(m.var - 2.0) <= 3.0 * m.var_se);
}

TEST_CASE("inhomogeneous poisson matches its compensator") {
  const TimeGrid g = make_uniform_grid(1.0, 16);
  const IntensitySpec lambda = IntensitySpec::deterministic(1.0, 2.0);  // Lambda(1) = 2
  const int n = 100000;
  std::vector<double> count(n);
  for (int r = 0; r < n; ++r) {
    Engine e(32, r);
    count[r] = simulate_cox(g, lambda, e).path.total();
  }
  const Moments m = moments(count);
  CHECK(std::abs(m.mean - 2.0) <= 3.0 * m.mean_se);
  CHECK(std::abs(m.var - 2.0) <= 3.0 * m.var_se);
}

TEST_CASE("cox count variance: law of total variance") {
  const TimeGrid g = make_uniform_grid(1.0, 16);
  const IntensitySpec lambda = IntensitySpec::random_scaled({2.0, 0.5}, 1.0);
  CHECK(lambda.mean_rate(0.3) == doctest::Approx(1.0));
  const int n = 100000;
  std::vector<double> count(n);
  for (int r = 0; r < n; ++r) {
    Engine e(33, r);
    count[r] = simulate_cox(g, lambda, e).path.total();
  }
  const Moments m = moments(count);
  CHECK(std::abs(m.var - 1.5) <= 3.0 * m.var_se);
}

TEST_CASE("thinning bound violation is a numeric error") {
  const TimeGrid g = make_uniform_grid(1.0, 4);
  const IntensitySpec lambda = IntensitySpec::deterministic(1.0, 9.0, 2.0);
  bool thrown = false;
  for (int r = 0; r < 20 && !thrown; ++r) {
    Engine e(3, r);
    try {
      simulate_cox(g, lambda, e);
    } catch (const NumericError&) {
      thrown = true;
    }
  }
  CHECK(thrown);
  CHECK_THROWS_AS(IntensitySpec::deterministic(-1.0).validate(1.0), std::invalid_argument);
}

TEST_CASE("cox girsanov weight") {
  const TimeGrid g = make_uniform_grid(1.0, 8);
  const CountingPath some(g, {0.2, 0.7});
  CHECK(girsanov_weight_cox(some, [](double) { return 1.0; }) == 1.0);
  const CountingPath none(g, {});
  CHECK(girsanov_weight_cox(none, [](double) { return 2.0; }) == doctest::Approx(0.367879441171).epsilon(1e-10));
  CHECK_THROWS_AS(girsanov_weight_cox(some, [](double t) { return t < 0.5 ? 0.0 : 1.0; }), std::invalid_argument);

  const int n = 100000;
  std::vector<double> w(n);
  for (int r = 0; r < n; ++r) {
    Engine e(41, r);
    w[r] = girsanov_weight_cox(simulate_cox(g, IntensitySpec::deterministic(1.0), e).path,
                               [](double) { return 2.0; });
  }
  const Moments m = moments(w);
  CHECK(std::abs(m.mean - 1.0) <= 3.0 * m.mean_se);

  std::vector<double> w2(n);
  for (int r = 0; r < n; ++r) {
    Engine e(42, r);
    w2[r] = girsanov_weight_cox(simulate_cox(g, IntensitySpec::deterministic(1.0), e).path,
                                [](double t) { return 0.5 + t; });
  }
  const Moments m2 = moments(w2);
  CHECK(std::abs(m2.mean - 1.0) <= 3.0 * m2.mean_se);
}
