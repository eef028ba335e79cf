#include "fracstein/cramer_rao.hpp"

#include "fracstein/quadrature.hpp"

#include <cmath>

namespace fracstein {

namespace {

void check_horizon(Real horizon) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("T must be > 0");
}

void check_alpha(Real alpha) {
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
}

void check_p(Real p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("p must lie in (1, inf)");
}

// int_0^T int_0^T |t - s|^{e} dt ds for e > -1.
Real power_double_integral(Real horizon, Real e) {
  if (!(e > -1.0)) return kInfinity<Real>;
  return 2.0 * std::pow(horizon, e + 2.0) / ((e + 1.0) * (e + 2.0));
}

}  // namespace

Real cr_l2_gaussian(const MeasureSpec& mu, Real horizon) {
  check_horizon(horizon);
  mu.validate(horizon);
  if (mu.kind == MeasureSpec::Kind::Lebesgue) return 0.5 * horizon * horizon;
  Real sum = 0.0;
  for (const Atom& atom : mu.atoms) sum += atom.weight * atom.time;
  return sum;
}

Real cr_w2alpha_gaussian(Real horizon, Real alpha) {
  check_horizon(horizon);
  check_alpha(alpha);
  return kernel_double_integral(horizon, alpha);
}

Real cr_walphap_gaussian(Real horizon, Real alpha, Real p) {
  check_horizon(horizon);
  check_alpha(alpha);
  check_p(p);
  const Real gap = std::max(0.0, 0.5 - alpha);
  if (gap == 0.0) return kInfinity<Real>;
  const Real q = p / (p - 1.0);
  const Real cq = gaussian_abs_moment(q);
  return std::pow(cq, -p / q) * 2.0 * std::pow(horizon, 1.0 - p * alpha + 0.5 * p) /
         (p * gap * (1.0 + p * gap));
}

Real risk_of_X_walphap(Real horizon, Real alpha, Real p) {
  check_horizon(horizon);
  check_alpha(alpha);
  check_p(p);
  return gaussian_abs_moment(p) * power_double_integral(horizon, 0.5 * p - p * alpha - 1.0);
}

Real cr_l2_cox(const IntensitySpec& intensity, const MeasureSpec& mu, Real horizon) {
  check_horizon(horizon);
  intensity.validate(horizon);
  mu.validate(horizon);
  if (mu.kind == MeasureSpec::Kind::Lebesgue) {
    // int_0^T E[u_t] dt with E[u_t] = m (c0 t + c1 t^2 / 2).
    return integrate_adaptive([&](Real t) { return intensity.mean_compensator(t); }, 0.0, horizon, 1e-13);
  }
  Real sum = 0.0;
  for (const Atom& atom : mu.atoms) sum += atom.weight * intensity.mean_compensator(atom.time);
  return sum;
}

Real cr_w2alpha_cox(const IntensitySpec& intensity, Real horizon, Real alpha) {
  check_horizon(horizon);
  check_alpha(alpha);
  intensity.validate(horizon);
  const auto mean = [&](Real r) { return intensity.mean_rate(r); };
  const bool degenerate = mean(0.0) == 0.0 && mean(horizon) == 0.0;
  if (degenerate) return 0.0;
  if (alpha >= 0.5) return kInfinity<Real>;
  const Real beta = 2.0 * alpha + 1.0;
  const auto kernel = [&](Real r) {
    if (r <= 0.0 || r >= horizon) return 0.0;
    return kernel_cell_weight(0.0, r, r, horizon, beta);
  };
  return 2.0 * integrate_adaptive([&](Real r) { return mean(r) * kernel(r); }, 0.0, horizon, 1e-13);
}

}  // namespace fracstein
