#include "fracstein/stein.hpp"
#include "fracstein/cramer_rao.hpp"
#include "fracstein/rng.hpp"
#include "fracstein/sobolev_energy.hpp"
#include "fracstein/statistics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace fracstein;

namespace {

Vector gaussian_vector(Index n, std::uint64_t seed, std::uint64_t stream) {
  Engine e(seed, stream);
  std::normal_distribution<double> z;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = z(e);
  return v;
}

Vector primitive_nodes(const TimeGrid& g, const Vector& v) {
  Vector out = Vector::Zero(g.size());
  for (Index i = 0; i < g.cells(); ++i) out(i + 1) = out(i) + v(i) * g.width(i);
  return out;
}

const SteinOperator& default_op() {
  static const SteinOperator op(SteinConfig::uniform(1.0, 8, -1.0, 0.25));
  return op;
}

Vector with_q(const SteinOperator& op, Vector dx, double q) {
  return dx * std::sqrt(q / quadratic_form_Q(op, dx));
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_THROWS_WITH_AS(SteinConfig::uniform(1.0, 2, -0.1, 0.25), "stein: n >= 3 required", std::invalid_argument);
  CHECK_THROWS_AS(SteinConfig::uniform(1.0, 8, 0.5, 0.25), std::invalid_argument);
  CHECK_THROWS_AS(SteinConfig::uniform(1.0, 8, -3.0, 0.25), std::invalid_argument);
  CHECK_THROWS_AS(SteinConfig::uniform(1.0, 8, 0.0, 0.25), std::invalid_argument);
  CHECK_THROWS_AS(SteinConfig::uniform(1.0, 8, -1.0, 0.5), std::invalid_argument);
  CHECK_NOTHROW(SteinConfig::uniform(1.0, 3, -0.25, 0.25));
}

TEST_CASE("A reproduces the energy of the constant-rate primitive") {
  for (Index n : {3, 5, 8, 16}) {
    const SteinOperator op(SteinConfig::uniform(1.0, n, -0.2, 0.25));
    CHECK(op.A().sum() == doctest::Approx(8.0 / 15.0).epsilon(1e-6));
  }
}

TEST_CASE("A is symmetric positive definite and B inverts it") {
  for (Index n : {3, 8, 17, 32}) {
    for (double alpha : {0.1, 0.25, 0.45}) {
      const SteinOperator op(SteinConfig::uniform(1.0, n, -0.2, alpha));
      const Matrix& A = op.A();
      CHECK((A - A.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK((A * op.B() - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK((op.B() * A - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-8);
      Eigen::LLT<Matrix> llt(A);
      CHECK(llt.info() == Eigen::Success);
      const Vector pivots = Matrix(llt.matrixL()).diagonal();
      CHECK(pivots.minCoeff() > 0.0);
    }
  }
}

TEST_CASE("A agrees with the closed-form ramp gram") {
  Vector nodes(7);
  nodes << 0.0, 0.1, 0.25, 0.5, 0.6, 0.85, 1.0;
  SteinConfig config{TimeGrid(nodes), -0.5, 0.3};
  const SteinOperator op(config);
  // Primitive slopes equal v, so A is the ramp gram itself.
  const Matrix gram = ramp_gram(config.coarse, 0.3);
  CHECK((op.A() - gram).cwiseAbs().maxCoeff() <= 1e-7 * gram.cwiseAbs().maxCoeff());
}

TEST_CASE("quadratic form of A equals the primitive energy") {
  const SteinOperator& op = default_op();
  const TimeGrid& g = op.config().coarse;
  for (std::uint64_t r = 0; r < 100; ++r) {
    const Vector v = gaussian_vector(8, 21, r);
    const double e = frac_energy({g, primitive_nodes(g, v)}, 0.25, 2.0, Regime::PiecewiseLinear);
    CHECK(v.dot(op.A() * v) == doctest::Approx(e).epsilon(1e-5));
  }
}

TEST_CASE("hat primitive energy matches independent quadrature") {
  const SteinOperator op(SteinConfig::uniform(1.0, 4, -0.5, 0.25));
  Vector v = Vector::Zero(4);
  v(0) = 1.0;
  v(1) = -1.0;
  // 20-digit numeric double integral of the hat's energy.
  CHECK(v.dot(op.A() * v) == doctest::Approx(0.0850155150700719).epsilon(1e-5));
}

TEST_CASE("quadratic form Q") {
  const SteinOperator& op = default_op();
  for (Index i = 0; i < 8; ++i) {
    CHECK(quadratic_form_Q(op, op.A().col(i)) == doctest::Approx(op.A()(i, i)).epsilon(1e-10));
  }
  const Vector dx = gaussian_vector(8, 3, 0);
  const double q = quadratic_form_Q(op, dx);
  CHECK(q > 0.0);
  CHECK(quadratic_form_Q(op, -2.5 * dx) == doctest::Approx(6.25 * q).epsilon(1e-13));
  CHECK_THROWS_AS(quadratic_form_Q(op, Vector::Zero(8)), std::invalid_argument);
  CHECK_THROWS_AS(quadratic_form_Q(op, Vector::Ones(5)), std::invalid_argument);
}

TEST_CASE("overlap lengths") {
  const TimeGrid g = make_uniform_grid(1.0, 4);
  CHECK(overlap_lengths(g, 0.0).isZero());
  const Vector l = overlap_lengths(g, 0.6);
  CHECK(l(0) == doctest::Approx(0.25));
  CHECK(l(1) == doctest::Approx(0.25));
  CHECK(l(2) == doctest::Approx(0.1));
  CHECK(l(3) == 0.0);
  CHECK(overlap_lengths(g, 1.0).sum() == doctest::Approx(1.0));
}

TEST_CASE("shift matches a finite-difference Malliavin derivative") {
  // G(eps) = 2a log <B' d(X + eps (. ^ t)), d(X + eps (. ^ t))> with B' an
  // LU inverse of A; the directional increment of (. ^ t) over cell j is l_j(t).
  const SteinOperator& op = default_op();
  const Matrix b_lu = op.A().fullPivLu().inverse();
  const double a = op.config().a;
  const auto G = [&](const Vector& x) { return 2.0 * a * std::log(x.dot(b_lu * x)); };
  Engine e(5, 0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::uint64_t r = 0; r < 100; ++r) {
    const Vector dx = gaussian_vector(8, 6, r) / std::sqrt(8.0);
    const double t = u01(e);
    const Vector l = overlap_lengths(op.config().coarse, t);
    const double h = 1e-2 * dx.norm() / std::max(l.norm(), 1e-300);
    const auto central = [&](double step) { return (G(dx + step * l) - G(dx - step * l)) / (2.0 * step); };
    const double fd = (4.0 * central(h / 2.0) - central(h)) / 3.0;
    const double xi = stein_shift(op, dx, t);
    CHECK(xi == doctest::Approx(fd).epsilon(1e-6).scale(1e-9));
  }
}

TEST_CASE("shift properties") {
  const SteinOperator& op = default_op();
  const Vector dx = gaussian_vector(8, 7, 0);
  CHECK(stein_shift(op, dx, 0.0) == 0.0);
  CHECK_THROWS_AS(stein_shift(op, dx, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(stein_shift(op, dx, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(stein_shift(op, Vector::Zero(8), 0.5), std::invalid_argument);
  // Degree -1 homogeneity: log F^2 shifts by a constant under scaling, its
  // derivative along a fixed direction scales inversely.
  for (double lambda : {0.5, 2.0, 4.0, -1.0}) {
    for (double t : {0.1, 0.37, 0.5, 1.0}) {
      CHECK(stein_shift(op, lambda * dx, t) * lambda == doctest::Approx(stein_shift(op, dx, t)).epsilon(1e-12));
    }
  }
  // a -> 0: vanishing shrinkage.
  const SteinOperator tiny(SteinConfig::uniform(1.0, 8, -1e-9, 0.25));
  CHECK(std::abs(stein_shift(tiny, dx, 0.7)) < 1e-7);
}

TEST_CASE("shift on a grid equals pointwise evaluation") {
  const SteinOperator& op = default_op();
  const Vector dx = gaussian_vector(8, 8, 0);
  const TimeGrid fine = make_uniform_grid(1.0, 64);
  const Vector on = stein_shift_on(op, dx, fine);
  for (Index k = 0; k < fine.size(); ++k) {
    CHECK(on(k) == doctest::Approx(stein_shift(op, dx, fine.node(k))).epsilon(1e-12).scale(1e-14));
  }
  CHECK_THROWS_AS(stein_shift_on(op, dx, make_uniform_grid(2.0, 64)), std::invalid_argument);
}

TEST_CASE("laplacian of F") {
  const SteinOperator op3(SteinConfig::uniform(1.0, 3, -0.25, 0.25));
  CHECK(laplacian_F(op3, with_q(op3, gaussian_vector(3, 9, 0), 1.0)) == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(laplacian_F(default_op(), with_q(default_op(), gaussian_vector(8, 9, 1), 2.0)) ==
        doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(std::abs(laplacian_coefficient(8, -1e-12)) < 1e-10);

  for (Index n : {3, 4, 8, 20}) {
    const double lo = 1.0 - 0.5 * static_cast<double>(n);
    for (int k = 1; k < 10; ++k) {
      const double a = lo * k / 10.0;
      CHECK(laplacian_coefficient(n, a) < 0.0);
    }
    CHECK(laplacian_coefficient(n, 0.5) > 0.0);
  }
  const SteinOperator op(SteinConfig::uniform(1.0, 8, -2.0, 0.25));
  for (std::uint64_t r = 0; r < 20; ++r) CHECK(laplacian_F(op, gaussian_vector(8, 10, r)) < 0.0);
}

TEST_CASE("coarse increments and the shrunk path") {
  const SteinOperator& op = default_op();
  const TimeGrid fine = make_uniform_grid(1.0, 32);
  Engine e(11, 0);
  const RealPath x = simulate_bm(fine, e);
  const Vector dx = coarse_increments(x, op);
  CHECK(dx.size() == 8);
  CHECK(dx(2) == doctest::Approx(x.values(12) - x.values(8)));
  CHECK(dx.sum() == doctest::Approx(x.values(32)));

  const RealPath y = shrunk_estimator(x, op);
  CHECK(y.values(0) == 0.0);
  CHECK(y.values(20) == doctest::Approx(x.values(20) + stein_shift(op, dx, fine.node(20))).epsilon(1e-12));

  const SteinOperator tiny(SteinConfig::uniform(1.0, 8, -1e-9, 0.25));
  CHECK((shrunk_estimator(x, tiny).values - x.values).cwiseAbs().maxCoeff() < 1e-7);

  const TimeGrid odd = make_uniform_grid(1.0, 20);
  Engine e2(11, 1);
  CHECK_THROWS_AS(coarse_increments(simulate_bm(odd, e2), op), std::invalid_argument);
}

TEST_CASE("predicted risk") {
  const SteinOperator& op = default_op();
  const PredictedRisk zero = predicted_risk(op, DriftSpec::zero(), 20000, 12);
  CHECK(zero.rho == doctest::Approx(8.0 / 3.0));
  CHECK(zero.mean_inv_q > 0.0);
  CHECK(zero.risk == doctest::Approx(zero.rho - 32.0 * zero.mean_inv_q).epsilon(1e-14));
  CHECK(zero.risk < 8.0 / 3.0);
  const PredictedRisk drift = predicted_risk(op, DriftSpec::linear(0.5), 20000, 12);
  CHECK(drift.risk < 8.0 / 3.0);

  const SteinOperator tiny(SteinConfig::uniform(1.0, 8, -1e-9, 0.25));
  CHECK(predicted_risk(tiny, DriftSpec::zero(), 1000, 1).risk == doctest::Approx(8.0 / 3.0).epsilon(1e-7));

  // Same streams, any worker count.
  const PredictedRisk w1 = predicted_risk(op, DriftSpec::zero(), 3000, 4, 1);
  const PredictedRisk w3 = predicted_risk(op, DriftSpec::zero(), 3000, 4, 3);
  CHECK(w1.risk == w3.risk);
  CHECK(w1.risk_stderr == w3.risk_stderr);

  CHECK_THROWS_AS(predicted_risk(op, DriftSpec::zero(), 1, 1), std::invalid_argument);
}

TEST_CASE("increments read from paths agree with direct draws") {
  const SteinOperator& op = default_op();
  const DriftSpec drift = DriftSpec::linear(0.5);
  const TimeGrid fine = make_uniform_grid(1.0, 64);
  const Index reps = 20000;
  std::vector<double> inv_q(reps);
  for (Index r = 0; r < reps; ++r) {
    Engine e(13, r);
    const RealPath x = shift_by_drift(simulate_bm(fine, e), drift);
    inv_q[r] = 1.0 / quadratic_form_Q(op, coarse_increments(x, op));
  }
  const SampleSummary path = summarize(inv_q);
  const PredictedRisk direct = predicted_risk(op, drift, reps, 14);
  CHECK(std::abs(path.mean - direct.mean_inv_q) <= 3.0 * std::hypot(path.std_error, direct.inv_q_stderr));
}

TEST_CASE("risk decomposition at the coarse level") {
  // X - u = W; on the coarse grid the interpolants' W^{alpha,2} products are
  // exact through the ramp gram, and the unresolved bridges are independent of
  // xi, so E[|xi|^2 + 2 <W, xi>] must equal 4 E[Delta F / F].
  const SteinOperator& op = default_op();
  const TimeGrid& g = op.config().coarse;
  const Matrix gram = ramp_gram(g, 0.25);
  const Index reps = 100000;
  std::vector<double> lhs(reps), rhs(reps);
  const double coef = 4.0 * laplacian_coefficient(8, -1.0);
  for (Index r = 0; r < reps; ++r) {
    const Vector dw = gaussian_vector(8, 15, r) * std::sqrt(g.width(0));
    const Vector xi = stein_shift_on(op, dw, g);
    const Vector xi_slope = (xi.tail(8) - xi.head(8)) / g.width(0);
    const Vector w_slope = dw / g.width(0);
    lhs[r] = xi_slope.dot(gram * xi_slope) + 2.0 * w_slope.dot(gram * xi_slope);
    rhs[r] = coef / quadratic_form_Q(op, dw);
  }
  std::vector<double> diff(reps);
  for (Index r = 0; r < reps; ++r) diff[r] = lhs[r] - rhs[r];
  const SampleSummary d = summarize(diff);
  CHECK(std::abs(d.mean) <= 3.0 * d.std_error);
  CHECK(summarize(lhs).mean < 0.0);
}
