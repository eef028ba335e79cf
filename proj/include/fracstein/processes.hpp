#pragma once

#include "fracstein/rng.hpp"
#include "fracstein/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace fracstein {

// Discretized observation window 0 = tau_0 < ... < tau_m = T, m >= 2.
// Immutable; copies share the node storage.
class TimeGrid {
 public:
  explicit TimeGrid(Vector nodes);

  Real horizon() const { return (*nodes_)(nodes_->size() - 1); }
  Index cells() const { return nodes_->size() - 1; }
  Index size() const { return nodes_->size(); }
  Real node(Index k) const { return (*nodes_)(k); }
  // Width of cell k = [tau_k, tau_{k+1}], k = 0..cells()-1.
  Real width(Index k) const { return (*nodes_)(k + 1) - (*nodes_)(k); }
  const Vector& nodes() const { return *nodes_; }
  Vector widths() const;

  // Index of the node equal to t up to rel_tol * T, if any.
  std::optional<Index> find_node(Real t, Real rel_tol = 1e-10) const;

  bool operator==(const TimeGrid& other) const;

 private:
  std::shared_ptr<const Vector> nodes_;
};

TimeGrid make_uniform_grid(Real horizon, Index cells);

// Real-valued path sampled at the grid nodes.
struct RealPath {
  TimeGrid grid;
  Vector values;
};

// Jump record of a counting process on [0, T].
class CountingPath {
 public:
  CountingPath(TimeGrid grid, std::vector<Real> jump_times);

  const TimeGrid& grid() const { return grid_; }
  const std::vector<Real>& jump_times() const { return jumps_; }
  Index total() const { return static_cast<Index>(jumps_.size()); }
  // N(tau_k) = #{jumps <= tau_k}; a jump exactly at a node is counted there.
  Vector counts() const;
  RealPath as_path() const { return {grid_, counts()}; }

 private:
  TimeGrid grid_;
  std::vector<Real> jumps_;
};

// Deterministic drift u(t) = int_0^t u'(s) ds in the Cameron-Martin space.
class DriftSpec {
 public:
  static DriftSpec zero();
  // u'(t) = c0 + c1 t.
  static DriftSpec affine_rate(Real c0, Real c1);
  // u(t) = slope * t.
  static DriftSpec linear(Real slope) { return affine_rate(slope, 0.0); }
  // u(t) = amplitude * sin(frequency * t).
  static DriftSpec sine(Real amplitude, Real frequency);
  // u' given by samples at the nodes of `grid`, linearly interpolated; the
  // primitive is the cumulative trapezoid at the nodes (exact for the
  // interpolant everywhere).
  static DriftSpec sampled(TimeGrid grid, Vector rates);

  Real rate(Real t) const;
  Real value(Real t) const;
  Vector values_on(const TimeGrid& grid) const;
  Vector rates_on(const TimeGrid& grid) const;
  bool is_zero() const;
  std::string describe() const;

 private:
  struct Affine {
    Real c0, c1;
  };
  struct Sine {
    Real amplitude, frequency;
  };
  struct Sampled {
    TimeGrid grid;
    Vector rates;
    Vector primitive;
  };
  explicit DriftSpec(std::variant<Affine, Sine, Sampled> form) : form_(std::move(form)) {}
  std::variant<Affine, Sine, Sampled> form_;
};

// Gamma(shape, scale) law of the F_0-measurable intensity multiplier.
struct GammaLaw {
  Real shape = 1.0;
  Real scale = 1.0;
  Real mean() const { return shape * scale; }
  Real variance() const { return shape * scale * scale; }
};

// Cox intensity lambda_t = Z * base(t), base(t) = c0 + c1 t, with Z = 1
// (deterministic) or Z ~ Gamma drawn once per realization.
class IntensitySpec {
 public:
  static IntensitySpec deterministic(Real c0, Real c1 = 0.0, std::optional<Real> base_max = {});
  static IntensitySpec random_scaled(GammaLaw law, Real c0, Real c1 = 0.0,
                                     std::optional<Real> base_max = {});

  bool is_random() const { return law_.has_value(); }
  const std::optional<GammaLaw>& multiplier_law() const { return law_; }
  Real base_rate(Real t) const { return c0_ + c1_ * t; }
  Real base_compensator(Real t) const { return c0_ * t + 0.5 * c1_ * t * t; }
  // Dominating rate for thinning of the base curve on [0, T].
  Real base_bound(Real horizon) const;
  Real mean_multiplier() const { return law_ ? law_->mean() : 1.0; }
  Real mean_rate(Real t) const { return mean_multiplier() * base_rate(t); }
  Real mean_compensator(Real t) const { return mean_multiplier() * base_compensator(t); }
  // Throws std::invalid_argument unless base >= 0 on [0, T].
  void validate(Real horizon) const;
  std::string describe() const;

 private:
  IntensitySpec(Real c0, Real c1, std::optional<GammaLaw> law, std::optional<Real> base_max);
  Real c0_, c1_;
  std::optional<GammaLaw> law_;
  std::optional<Real> base_max_;
};

RealPath simulate_bm(const TimeGrid& grid, Engine& engine);

RealPath shift_by_drift(const RealPath& path, const DriftSpec& drift);

// exp(sum u'(tau_{k-1}) dX_k - 1/2 sum u'(tau_{k-1})^2 dtau_k), left-point Ito sum.
Real girsanov_weight_gaussian(const RealPath& path, const DriftSpec& drift);

struct CoxDraw {
  CountingPath path;
  Real multiplier = 1.0;  // realized Z
};

// Lewis-Shedler thinning conditional on the realized multiplier.
CoxDraw simulate_cox(const TimeGrid& grid, const IntensitySpec& intensity, Engine& engine);

// prod_k u'(T_k) * exp(-int_0^T (u' - 1)), integral by trapezoid on the grid.
Real girsanov_weight_cox(const CountingPath& path, const std::function<Real(Real)>& rate);

}  // namespace fracstein
