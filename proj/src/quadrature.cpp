#include "fracstein/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace fracstein {

namespace {

GaussRule golub_welsch(int order) {
  Matrix jacobi = Matrix::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const Real beta = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = beta;
    jacobi(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(jacobi);
  GaussRule rule;
  rule.nodes = solver.eigenvalues();
  rule.weights = 2.0 * solver.eigenvectors().row(0).transpose().array().square();
  // Symmetrize: the eigen solver leaves O(eps) asymmetry.
  for (int i = 0; i < order / 2; ++i) {
    const int j = order - 1 - i;
    const Real x = 0.5 * (rule.nodes(j) - rule.nodes(i));
    const Real w = 0.5 * (rule.weights(i) + rule.weights(j));
    rule.nodes(i) = -x;
    rule.nodes(j) = x;
    rule.weights(i) = w;
    rule.weights(j) = w;
  }
  if (order % 2 == 1) rule.nodes(order / 2) = 0.0;
  return rule;
}

Real apply_rule(const GaussRule& rule, const std::function<Real(Real)>& f, Real a, Real b) {
  const Real half = 0.5 * (b - a);
  const Real mid = 0.5 * (a + b);
  Real sum = 0.0;
  for (Index i = 0; i < rule.nodes.size(); ++i) sum += rule.weights(i) * f(mid + half * rule.nodes(i));
  return half * sum;
}

Real adaptive_step(const GaussRule& rule, const std::function<Real(Real)>& f, Real a, Real b,
                   Real whole, Real rel_tol, Real abs_tol, int depth) {
  const Real mid = 0.5 * (a + b);
  const Real left = apply_rule(rule, f, a, mid);
  const Real right = apply_rule(rule, f, mid, b);
  const Real refined = left + right;
  if (depth <= 0 || std::abs(refined - whole) <= std::max(rel_tol * std::abs(refined), abs_tol)) {
    return refined;
  }
  return adaptive_step(rule, f, a, mid, left, rel_tol, 0.5 * abs_tol, depth - 1) +
         adaptive_step(rule, f, mid, b, right, rel_tol, 0.5 * abs_tol, depth - 1);
}

}  // namespace

const GaussRule& gauss_legendre(int order) {
  if (order < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<GaussRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<GaussRule>(golub_welsch(order));
  return *slot;
}

Real integrate_adaptive(const std::function<Real(Real)>& f, Real a, Real b, Real rel_tol,
                        Real abs_tol, int max_depth) {
  if (a == b) return 0.0;
  const GaussRule& rule = gauss_legendre(10);
  const Real whole = apply_rule(rule, f, a, b);
  return adaptive_step(rule, f, a, b, whole, rel_tol, abs_tol, max_depth);
}

Real pairwise_sum(std::span<const Real> values) {
  constexpr std::size_t kLeaf = 32;
  if (values.size() <= kLeaf) {
    Real sum = 0.0;
    for (Real v : values) sum += v;
    return sum;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace fracstein
