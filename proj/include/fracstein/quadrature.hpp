#pragma once

#include "fracstein/types.hpp"

#include <functional>
#include <span>

namespace fracstein {

// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  Vector nodes;
  Vector weights;
};

// Rules are computed once per order (Golub-Welsch) and cached; the returned
// reference stays valid for the lifetime of the program.
const GaussRule& gauss_legendre(int order);

// Adaptive Gauss-Legendre on [a, b]: compares an order-q estimate against the
// sum over the two halves and bisects until the difference is below
// max(rel_tol * |I|, abs_tol). Bounded integrands with derivative
// singularities at the endpoints (sqrt, x log x) converge at full accuracy;
// unbounded ones stop at the depth limit.
Real integrate_adaptive(const std::function<Real(Real)>& f, Real a, Real b,
                        Real rel_tol = 1e-10, Real abs_tol = 1e-300, int max_depth = 40);

// Pairwise (cascade) summation. The result depends only on the order of the
// input, so sums over per-replication results are reproducible.
Real pairwise_sum(std::span<const Real> values);

}  // namespace fracstein
