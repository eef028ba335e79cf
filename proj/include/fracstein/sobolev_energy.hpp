#pragma once

#include "fracstein/processes.hpp"
#include "fracstein/types.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace fracstein {

// ---------------------------------------------------------------------------
// Risk functionals

struct Atom {
  Real time;
  Real weight;
};

// Finite Borel measure on [0, T]: Lebesgue or a finite sum of point masses.
struct MeasureSpec {
  enum class Kind { Lebesgue, Discrete };
  Kind kind = Kind::Lebesgue;
  std::vector<Atom> atoms;

  static MeasureSpec lebesgue() { return {}; }
  static MeasureSpec discrete(std::vector<Atom> atoms) { return {Kind::Discrete, std::move(atoms)}; }
  void validate(Real horizon) const;
  std::string describe() const;
};

enum class EnergyKind { L2, H1, Wfrac };

// Quadrature regime for W^{alpha,p}: piecewise-constant uses the left node
// value on each cell and closed-form cell-pair kernel weights (needs
// alpha < 1/p); piecewise-linear integrates the linear interpolant.
enum class Regime { PiecewiseConstant, PiecewiseLinear };

struct EnergySpec {
  EnergyKind kind = EnergyKind::L2;
  MeasureSpec mu;
  Real alpha = 0.25;
  Real p = 2.0;
  Regime regime = Regime::PiecewiseLinear;
  // Gaussian W^{alpha,2} piecewise-linear only: add the exact expected energy
  // of the sub-grid Brownian-bridge fluctuations so the estimate targets the
  // continuous-time risk.
  bool subgrid_correction = false;

  static EnergySpec l2(MeasureSpec mu = MeasureSpec::lebesgue()) {
    EnergySpec s;
    s.kind = EnergyKind::L2;
    s.mu = std::move(mu);
    return s;
  }
  static EnergySpec h1() {
    EnergySpec s;
    s.kind = EnergyKind::H1;
    return s;
  }
  static EnergySpec wfrac(Real alpha, Real p, Regime regime) {
    EnergySpec s;
    s.kind = EnergyKind::Wfrac;
    s.alpha = alpha;
    s.p = p;
    s.regime = regime;
    return s;
  }

  void validate() const;
  std::string describe() const;
};

// ---------------------------------------------------------------------------
// Closed forms

// G with int_a^b int_c^d (t - s)^{-beta} dt ds = G(d-a) - G(d-b) - G(c-a) + G(c-b).
// G(x) = x^{2-beta} / ((1-beta)(2-beta)), and -log(x) on the beta = 2 branch
// (the additive constant cancels in the four-term combination).
template <class Scalar>
Scalar kernel_rect_primitive(Scalar x, Scalar beta) {
  using std::abs;
  using std::log;
  using std::pow;
  if (abs(beta - Scalar(2)) < Scalar(1e-12)) {
    return x > Scalar(0) ? -log(x) : kInfinity<Scalar>;
  }
  if (x == Scalar(0)) return beta < Scalar(2) ? Scalar(0) : kInfinity<Scalar>;
  return pow(x, Scalar(2) - beta) / ((Scalar(1) - beta) * (Scalar(2) - beta));
}

// int_a^b int_c^d (t - s)^{-beta} dt ds for a < b <= c < d, beta in (1, 3).
// +inf when the cells touch (b == c) and beta >= 2.
template <class Scalar>
Scalar kernel_cell_weight(Scalar a, Scalar b, Scalar c, Scalar d, Scalar beta) {
  if (!(a < b) || !(c < d)) throw std::invalid_argument("kernel_cell_weight: empty cell");
  if (b > c) throw std::invalid_argument("kernel_cell_weight: cells overlap");
  if (!(beta > Scalar(1)) || !(beta < Scalar(3))) {
    throw std::invalid_argument("kernel_cell_weight: exponent must lie in (1, 3)");
  }
  if (b == c && beta >= Scalar(2) - Scalar(1e-12)) return kInfinity<Scalar>;
  return kernel_rect_primitive(d - a, beta) - kernel_rect_primitive(d - b, beta) -
         kernel_rect_primitive(c - a, beta) + kernel_rect_primitive(c - b, beta);
}

// int_0^T int_0^T |t - s|^{-2 alpha} dt ds.
template <class Scalar>
Scalar kernel_double_integral(Scalar horizon, Scalar alpha) {
  if (!(alpha > Scalar(0)) || !(alpha < Scalar(1))) {
    throw std::invalid_argument("kernel_double_integral: alpha must lie in (0, 1)");
  }
  if (alpha >= Scalar(0.5)) return kInfinity<Scalar>;
  using std::pow;
  const Scalar e = Scalar(2) - Scalar(2) * alpha;
  return Scalar(2) * pow(horizon, e) / ((Scalar(1) - Scalar(2) * alpha) * e);
}

// c_q = E|Y|^q for Y ~ N(0, 1).
template <class Scalar>
Scalar gaussian_abs_moment(Scalar q) {
  if (!(q > Scalar(0))) throw std::invalid_argument("gaussian_abs_moment: q must be > 0");
  using std::exp;
  using std::lgamma;
  using std::log;
  return exp(Scalar(0.5) * q * log(Scalar(2)) + lgamma((q + Scalar(1)) / Scalar(2)) -
             Scalar(0.5) * log(std::numbers::pi_v<Scalar>));
}

// ---------------------------------------------------------------------------
// Path energies

// int |diff|^2 dmu: trapezoid for Lebesgue, linear interpolation at atoms.
Real l2_energy(const RealPath& diff, const MeasureSpec& mu);

// sum_k (dX_k)^2 / dtau_k.
Real h1_energy(const RealPath& path);

// W^{alpha,p} energy int int |f_t - f_s|^p / |t - s|^{p alpha + 1} of the
// path under the chosen regime (piecewise-linear: numeric quadrature to
// rel_tol).
Real frac_energy(const RealPath& path, Real alpha, Real p, Regime regime, Real rel_tol = 1e-6);

// Closed-form cell-pair weights omega_kl = kernel_cell_weight(cell k, cell l)
// with beta = p alpha + 1 for the piecewise-constant regime.
class CellKernel {
 public:
  CellKernel(TimeGrid grid, Real beta);

  const Matrix& weights() const { return omega_; }
  Real beta() const { return beta_; }
  // sum_{k != l} |v_k - v_l|^p omega_kl with v_k the left node value of cell k.
  Real energy(const Eigen::Ref<const Vector>& node_values, Real p) const;
  // p = 2 energies of the columns of `node_values` (one path per column).
  Vector quadratic_energies(const Matrix& node_values) const;
  // E of the p = 2 energy for a standard Brownian path:
  // sum_{k != l} |tau_k - tau_l| omega_kl.
  Real expected_brownian_energy() const;

 private:
  TimeGrid grid_;
  Real beta_;
  Matrix omega_;
  Vector row_sums_;
};

// Gram matrix G_kl = <r_k, r_l> of the unit-slope ramps r_k(t) = |[0,t] cap cell k|
// in the W^{alpha,2} energy, in closed form (Fubini onto the overlap
// variable, then exact antiderivatives; computed in extended precision). The
// energy of the linear interpolant with slopes s is s^T G s.
Matrix ramp_gram(const TimeGrid& grid, Real alpha);

// Numeric quadrature of the W^{alpha,p} energy of piecewise-linear
// interpolants on a fixed grid:
//   * same-cell pairs: closed form;
//   * adjacent pairs: Duffy split at the shared corner, radial part exact,
//     angular part by Gauss-Legendre;
//   * separated pairs: tensor Gauss-Legendre on an adaptively refined
//     subdivision, chosen once per pair geometry and cached.
// For non-even p, pairs on which f_t - f_s changes sign are integrated
// adaptively per call. For even p, separated pairs that share one rule along a
// whole diagonal (uniform grids) are summed through the rule's polynomial
// moments, one vectorized pass per diagonal.
class LinearEnergyQuadrature {
 public:
  LinearEnergyQuadrature(TimeGrid grid, Real alpha, Real p, Real rel_tol = 1e-6);

  Real evaluate(const Eigen::Ref<const Vector>& node_values) const;
  const TimeGrid& grid() const { return grid_; }

  struct Rule2D {
    std::vector<Real> s_frac, t_frac, weight;
  };
  struct Rule1D {
    std::vector<Real> r, weight;
  };

 private:
  Real separated_pair(Index k, Index l, const Rule2D& rule, const Vector& v, const Vector& slope) const;
  Real separated_pair_adaptive(Index k, Index l, const Vector& v, const Vector& slope) const;
  Real adjacent_pair(Index k, const Vector& slope) const;
  Real diagonal_by_moments(Index gap, const Vector& v, const Vector& inc, Matrix& work) const;

  TimeGrid grid_;
  Real alpha_, p_, beta_, degree_, rel_tol_;
  bool even_p_;
  Vector diag_coef_;
  std::vector<std::shared_ptr<const Rule2D>> pair_rules_;  // row-major over l >= k + 2
  std::vector<Index> pair_offset_;
  std::vector<std::shared_ptr<const Rule1D>> adjacent_rules_;  // [2k] triangle 1, [2k+1] triangle 2
  Vector adjacent_scale_;               // [2k], [2k+1]
  // Even p: moments M(i, j) = sum w s^i t^j of the rule shared by all pairs
  // with l - k = gap (empty matrix when the diagonal mixes geometries), and
  // the multinomial expansion of (b + c t - d s)^p as (k_b, j_t, i_s, coef).
  std::vector<Matrix> gap_moments_;
  struct Term {
    int b, t, s;
    Real coef;
  };
  std::vector<Term> terms_;
};

// Energy functional bound to a grid; precomputes kernels once for Monte Carlo.
class EnergyEvaluator {
 public:
  EnergyEvaluator(EnergySpec spec, TimeGrid grid);

  Real operator()(const Eigen::Ref<const Vector>& node_values) const;
  // Energies of the columns (each a path of node values).
  Vector batch(const Matrix& node_values) const;

  const EnergySpec& spec() const { return spec_; }
  const TimeGrid& grid() const { return grid_; }
  // Ramp Gram matrix (piecewise-linear p = 2 only).
  const Matrix& gram() const { return gram_; }

 private:
  EnergySpec spec_;
  TimeGrid grid_;
  Vector l2_weights_;
  std::optional<CellKernel> cell_kernel_;
  Matrix gram_;
  std::shared_ptr<const LinearEnergyQuadrature> quadrature_;
};

}  // namespace fracstein
