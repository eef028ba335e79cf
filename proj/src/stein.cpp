#include "fracstein/stein.hpp"

#include "fracstein/cramer_rao.hpp"
#include "fracstein/parallel.hpp"
#include "fracstein/rng.hpp"
#include "fracstein/sobolev_energy.hpp"
#include "fracstein/statistics.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace fracstein {

SteinConfig SteinConfig::uniform(Real horizon, Index n, Real a, Real alpha) {
  if (n < 3) throw std::invalid_argument("stein: n >= 3 required");
  SteinConfig c{make_uniform_grid(horizon, n), a, alpha};
  c.validate();
  return c;
}

void SteinConfig::validate() const {
  const Index cells = n();
  if (cells < 3) throw std::invalid_argument("stein: n >= 3 required");
  const Real lo = 1.0 - 0.5 * static_cast<Real>(cells);
  if (!(a > lo) || !(a < 0.0)) {
    std::ostringstream os;
    os << "stein: a must lie in (1 - n/2, 0) = (" << lo << ", 0)";
    throw std::invalid_argument(os.str());
  }
  if (!(alpha > 0.0) || !(alpha < 0.5)) throw std::invalid_argument("stein: alpha must lie in (0, 1/2)");
  if (!(quadrature_tol > 0.0)) throw std::invalid_argument("stein: quadrature tolerance must be > 0");
}

SteinOperator::SteinOperator(SteinConfig config) : config_(std::move(config)) {
  config_.validate();
  const Index n = config_.n();
  const TimeGrid& grid = config_.coarse;
  const LinearEnergyQuadrature energy(grid, config_.alpha, 2.0, config_.quadrature_tol);

  // Node values of the primitive of sum_i v_i 1_{I_i}.
  const auto primitive = [&](const Vector& v) {
    Vector nodes = Vector::Zero(n + 1);
    for (Index i = 0; i < n; ++i) nodes(i + 1) = nodes(i) + v(i) * grid.width(i);
    return nodes;
  };
  Vector diag(n);
  for (Index i = 0; i < n; ++i) diag(i) = energy.evaluate(primitive(Vector::Unit(n, i)));
  a_.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    a_(i, i) = diag(i);
    for (Index j = i + 1; j < n; ++j) {
      const Vector v = Vector::Unit(n, i) + Vector::Unit(n, j);
      a_(i, j) = 0.5 * (energy.evaluate(primitive(v)) - diag(i) - diag(j));
      a_(j, i) = a_(i, j);
    }
  }
  llt_.compute(a_);
  if (llt_.info() != Eigen::Success) {
    throw NumericError("stein: A is not positive definite; tighten the quadrature tolerance");
  }
  b_ = llt_.solve(Matrix::Identity(n, n));
  b_ = 0.5 * (b_ + b_.transpose()).eval();
}

SteinOperator assemble_A(const SteinConfig& config) { return SteinOperator(config); }

namespace {

void check_increments(const SteinOperator& op, const Vector& dx) {
  if (dx.size() != op.n()) throw std::invalid_argument("stein: increment vector must have length n");
  if (dx.isZero(0.0)) throw std::invalid_argument("stein: F is undefined at dx = 0");
}

}  // namespace

Real quadratic_form_Q(const SteinOperator& op, const Vector& dx) {
  check_increments(op, dx);
  return dx.dot(op.solve(dx));
}

Vector overlap_lengths(const TimeGrid& coarse, Real t) {
  const Index n = coarse.cells();
  Vector l(n);
  for (Index j = 0; j < n; ++j) l(j) = std::clamp(t - coarse.node(j), 0.0, coarse.width(j));
  return l;
}

Real stein_shift(const SteinOperator& op, const Vector& dx, Real t) {
  check_increments(op, dx);
  const TimeGrid& coarse = op.config().coarse;
  if (!(t >= 0.0) || t > coarse.horizon()) throw std::invalid_argument("stein_shift: t outside [0, T]");
  const Vector bdx = op.solve(dx);
  return 4.0 * op.config().a * bdx.dot(overlap_lengths(coarse, t)) / bdx.dot(dx);
}

Vector stein_shift_on(const SteinOperator& op, const Vector& dx, const TimeGrid& grid) {
  check_increments(op, dx);
  const TimeGrid& coarse = op.config().coarse;
  if (std::abs(grid.horizon() - coarse.horizon()) > 1e-12 * coarse.horizon()) {
    throw std::invalid_argument("stein: grid horizon differs from the coarse grid");
  }
  const Vector w = op.solve(dx);
  const Real scale = 4.0 * op.config().a / w.dot(dx);
  const Index n = coarse.cells();
  // <w, l(t)> is continuous and piecewise linear with slope w_j on cell j.
  Vector cumulative(n + 1);
  cumulative(0) = 0.0;
  for (Index j = 0; j < n; ++j) cumulative(j + 1) = cumulative(j) + w(j) * coarse.width(j);

  Vector out(grid.size());
  Index j = 0;
  for (Index k = 0; k < grid.size(); ++k) {
    const Real t = grid.node(k);
    while (j + 1 < n && t > coarse.node(j + 1)) ++j;
    const Real within = std::clamp(t - coarse.node(j), 0.0, coarse.width(j));
    out(k) = scale * (cumulative(j) + w(j) * within);
  }
  out(0) = 0.0;
  return out;
}

Real laplacian_coefficient(Index n, Real a) { return 2.0 * a * (2.0 * (a - 1.0) + static_cast<Real>(n)); }

Real laplacian_F(const SteinOperator& op, const Vector& dx) {
  const Real q = quadratic_form_Q(op, dx);
  return laplacian_coefficient(op.n(), op.config().a) * std::pow(q, op.config().a - 1.0);
}

Vector coarse_increments(const RealPath& path, const SteinOperator& op) {
  const TimeGrid& coarse = op.config().coarse;
  const Index n = coarse.cells();
  Vector at_nodes(n + 1);
  for (Index i = 0; i <= n; ++i) {
    const auto k = path.grid.find_node(coarse.node(i));
    if (!k) throw std::invalid_argument("stein: coarse node missing from the path grid");
    at_nodes(i) = path.values(*k);
  }
  return at_nodes.tail(n) - at_nodes.head(n);
}

RealPath shrunk_estimator(const RealPath& path, const SteinOperator& op) {
  const Vector dx = coarse_increments(path, op);
  return {path.grid, path.values + stein_shift_on(op, dx, path.grid)};
}

PredictedRisk predicted_risk(const SteinOperator& op, const DriftSpec& drift, Index reps, std::uint64_t seed,
                             int workers) {
  if (op.n() < 3) throw std::invalid_argument("stein: n >= 3 required");
  if (reps < 2) throw std::invalid_argument("predicted_risk: reps >= 2 required");
  const TimeGrid& coarse = op.config().coarse;
  const Index n = op.n();
  const Vector mean = [&] {
    const Vector u = drift.values_on(coarse);
    return Vector(u.tail(n) - u.head(n));
  }();
  const Vector sd = coarse.widths().cwiseSqrt();

  std::vector<Real> inv_q(reps);
  for_each_block(
      reps, 256,
      [&](Index begin, Index end) {
        std::normal_distribution<Real> normal;
        Vector dx(n);
        for (Index r = begin; r < end; ++r) {
          Engine engine(seed, static_cast<std::uint64_t>(r));
          for (Index i = 0; i < n; ++i) dx(i) = mean(i) + sd(i) * normal(engine);
          normal.reset();
          inv_q[r] = 1.0 / dx.dot(op.solve(dx));
        }
      },
      workers);

  const SampleSummary s = summarize(inv_q);
  const Real factor = 4.0 * laplacian_coefficient(n, op.config().a);
  PredictedRisk out;
  out.rho = cr_w2alpha_gaussian(op.config().horizon(), op.config().alpha);
  out.mean_inv_q = s.mean;
  out.inv_q_stderr = s.std_error;
  out.risk = out.rho + factor * s.mean;
  out.risk_stderr = std::abs(factor) * s.std_error;
  out.reps = reps;
  return out;
}

}  // namespace fracstein
