#pragma once

#include "fracstein/processes.hpp"
#include "fracstein/sobolev_energy.hpp"
#include "fracstein/types.hpp"

namespace fracstein {

// Lower bounds on the risk of unbiased estimators. Nonexistence regimes are
// reported as +inf rather than as errors.

// int_0^T t mu(dt).
Real cr_l2_gaussian(const MeasureSpec& mu, Real horizon);

// int_0^T int_0^T |t - s|^{-2 alpha} dt ds.
Real cr_w2alpha_gaussian(Real horizon, Real alpha);

// c_q^{-p/q} * 2 T^{1 - p alpha + p/2} / (p max(0, 1/2 - alpha) (1 + p (1/2 - alpha))),
// q = p / (p - 1).
Real cr_walphap_gaussian(Real horizon, Real alpha, Real p);

// W^{alpha,p} risk of X itself: c_p int int |t - s|^{p/2 - p alpha - 1}.
Real risk_of_X_walphap(Real horizon, Real alpha, Real p);

// int_0^T E[u_t] mu(dt) for the compensator u of the Cox intensity.
Real cr_l2_cox(const IntensitySpec& intensity, const MeasureSpec& mu, Real horizon);

// 2 int_0^T E[u'_r] K(r) dr, K(r) = int_r^T int_0^r (t - s)^{-2 alpha - 1} ds dt.
Real cr_w2alpha_cox(const IntensitySpec& intensity, Real horizon, Real alpha);

}  // namespace fracstein
