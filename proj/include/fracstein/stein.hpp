#pragma once

#include "fracstein/processes.hpp"
#include "fracstein/types.hpp"

#include <cstdint>

namespace fracstein {

// Shrinkage estimator X + xi with xi_t = D_{1[0,t]} log F^2 and
// F = <B dX, dX>^a, dX the increments of X over a coarse grid, B = A^{-1} and
// A the W^{alpha,2} Gram form of the coarse-cell indicators' primitives.
struct SteinConfig {
  TimeGrid coarse;
  Real a = -1.0;
  Real alpha = 0.25;
  Real quadrature_tol = 1e-9;

  static SteinConfig uniform(Real horizon, Index n, Real a, Real alpha);

  Index n() const { return coarse.cells(); }
  Real horizon() const { return coarse.horizon(); }
  // n >= 3, a in (1 - n/2, 0), alpha in (0, 1/2).
  void validate() const;
};

class SteinOperator {
 public:
  // Assembles A by polarization of the piecewise-linear energy quadrature and
  // factors it. Throws NumericError if A is not numerically SPD.
  explicit SteinOperator(SteinConfig config);

  const SteinConfig& config() const { return config_; }
  const Matrix& A() const { return a_; }
  const Matrix& B() const { return b_; }
  Index n() const { return config_.n(); }

  // B x via the Cholesky factor.
  Vector solve(const Vector& x) const { return llt_.solve(x); }

 private:
  SteinConfig config_;
  Matrix a_, b_;
  Eigen::LLT<Matrix> llt_;
};

SteinOperator assemble_A(const SteinConfig& config);

// Q = <B dx, dx>.
Real quadratic_form_Q(const SteinOperator& op, const Vector& dx);

// l_j(t) = |[0, t] cap [t_{j-1}, t_j]|.
Vector overlap_lengths(const TimeGrid& coarse, Real t);

// xi_t = 4 a <B dx, l(t)> / Q.
Real stein_shift(const SteinOperator& op, const Vector& dx, Real t);

// xi at every node of `grid` (O(n) setup, O(1) per node).
Vector stein_shift_on(const SteinOperator& op, const Vector& dx, const TimeGrid& grid);

// 2a (2(a - 1) + n).
Real laplacian_coefficient(Index n, Real a);

// Delta_alpha F = 2a (2(a - 1) + n) Q^{a - 1}.
Real laplacian_F(const SteinOperator& op, const Vector& dx);

// Increments of the path over the coarse cells; throws std::invalid_argument
// if a coarse node is not a node of the path grid.
Vector coarse_increments(const RealPath& path, const SteinOperator& op);

// X + xi on the path grid.
RealPath shrunk_estimator(const RealPath& path, const SteinOperator& op);

struct PredictedRisk {
  Real rho = 0.0;           // Cramer-Rao bound, the risk of X
  Real mean_inv_q = 0.0;    // MC estimate of E[1/Q]
  Real inv_q_stderr = 0.0;
  Real risk = 0.0;          // rho + 4 coef E[1/Q]
  Real risk_stderr = 0.0;
  Index reps = 0;
};

// rho + 8a(2a - 2 + n) E^u[1/Q], with dX drawn directly from its Gaussian law
// (mean u(t_i) - u(t_{i-1}), variance t_i - t_{i-1}). Replication r uses
// stream r of the engine keyed by `seed`.
PredictedRisk predicted_risk(const SteinOperator& op, const DriftSpec& drift, Index reps, std::uint64_t seed,
                             int workers = 0);

}  // namespace fracstein
