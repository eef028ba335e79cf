#include "fracstein/sobolev_energy.hpp"

#include "fracstein/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

namespace fracstein {

namespace {

constexpr int kPairOrder = 6;
constexpr int kAngularOrder = 8;

Real abs_pow(Real x, Real p) {
  if (p == 2.0) return x * x;
  if (p == 4.0) {
    const Real x2 = x * x;
    return x2 * x2;
  }
  return std::pow(std::abs(x), p);
}

bool is_even_integer(Real p) {
  return p == std::floor(p) && std::fmod(p, 2.0) == 0.0;
}

// Quantized geometry key so that cells of a uniform grid share rules even
// when node arithmetic differs in the last bit.
std::int64_t quantize(Real x, Real scale) {
  return std::llround(x / scale * 1e12);
}

// --- closed-form ramp Gram -------------------------------------------------

// G, its first and second primitives from 0 for the kernel |t-s|^{-beta}.
template <class Scalar>
struct KernelPrimitives {
  Scalar beta;
  bool log_branch;
  Scalar gamma, c;

  explicit KernelPrimitives(Scalar b)
      : beta(b), log_branch(std::abs(b - Scalar(2)) < Scalar(1e-12)), gamma(Scalar(2) - b),
        c(Scalar(1) / ((Scalar(1) - b) * (Scalar(2) - b))) {}

  Scalar g0(Scalar x) const {
    if (log_branch) return -std::log(x);
    return c * std::pow(x, gamma);
  }
  Scalar g1(Scalar x) const {
    if (x <= Scalar(0)) return Scalar(0);
    if (log_branch) return x - x * std::log(x);
    return c * std::pow(x, gamma + Scalar(1)) / (gamma + Scalar(1));
  }
  Scalar g2(Scalar x) const {
    x = std::abs(x);
    if (x <= Scalar(0)) return Scalar(0);
    if (log_branch) return Scalar(0.75) * x * x - Scalar(0.5) * x * x * std::log(x);
    return c * std::pow(x, gamma + Scalar(2)) / ((gamma + Scalar(1)) * (gamma + Scalar(2)));
  }
  // int int_{[a,b]^2} G(max(r, r')) dr dr' = 2 int_a^b G(y) (y - a) dy.
  Scalar max_on_square(Scalar a, Scalar b) const {
    const auto y_g = [&](Scalar y) { return y * g1(y) - g2(y); };
    return Scalar(2) * ((y_g(b) - y_g(a)) - a * (g1(b) - g1(a)));
  }
};

template <class Scalar>
Matrix ramp_gram_impl(const TimeGrid& grid, Real alpha) {
  const Index m = grid.cells();
  const KernelPrimitives<Scalar> kp(Scalar(2) * Scalar(alpha) + Scalar(1));
  const Scalar horizon = grid.horizon();
  const Scalar g_t = kp.g0(horizon);
  Matrix gram(m, m);
  for (Index k = 0; k < m; ++k) {
    const Scalar a = grid.node(k), b = grid.node(k + 1);
    for (Index l = k; l < m; ++l) {
      const Scalar c = grid.node(l), d = grid.node(l + 1);
      const Scalar hk = b - a, hl = d - c;
      Scalar t_min, t_max;
      if (k == l) {
        t_max = kp.max_on_square(a, b);
        t_min = kp.max_on_square(horizon - b, horizon - a);
      } else {
        t_max = hk * (kp.g1(d) - kp.g1(c));
        t_min = hl * (kp.g1(horizon - a) - kp.g1(horizon - b));
      }
      const Scalar t_dist = kp.g2(d - a) - kp.g2(d - b) - kp.g2(c - a) + kp.g2(c - b);
      const Scalar entry = Scalar(2) * (g_t * hk * hl - t_min - t_max + t_dist);
      gram(k, l) = static_cast<Real>(entry);
      gram(l, k) = gram(k, l);
    }
  }
  return gram;
}

// --- adaptive rule construction --------------------------------------------

// Tensor GL rule on [s0,s1] x [t0,t1] appended to `rule` (fractions relative
// to the cells starting at 0 and t_start).
void append_tensor(LinearEnergyQuadrature::Rule2D& rule, Real s0, Real s1, Real t0, Real t1, Real h1,
                   Real t_start, Real h2, Real beta) {
  const GaussRule& gl = gauss_legendre(kPairOrder);
  const Real hs = 0.5 * (s1 - s0), ms = 0.5 * (s0 + s1);
  const Real ht = 0.5 * (t1 - t0), mt = 0.5 * (t0 + t1);
  for (int i = 0; i < kPairOrder; ++i) {
    const Real s = ms + hs * gl.nodes(i);
    for (int j = 0; j < kPairOrder; ++j) {
      const Real t = mt + ht * gl.nodes(j);
      rule.s_frac.push_back(s / h1);
      rule.t_frac.push_back((t - t_start) / h2);
      rule.weight.push_back(hs * ht * gl.weights(i) * gl.weights(j) * std::pow(t - s, -beta));
    }
  }
}

// Integrals of the kernel times the test functions {1, s^P, t^P} (local,
// normalized coordinates) over a rectangle by one tensor GL rule.
std::array<Real, 3> tensor_moments(Real s0, Real s1, Real t0, Real t1, Real h1, Real t_start, Real h2,
                                   Real beta, Real degree) {
  const GaussRule& gl = gauss_legendre(kPairOrder);
  const Real hs = 0.5 * (s1 - s0), ms = 0.5 * (s0 + s1);
  const Real ht = 0.5 * (t1 - t0), mt = 0.5 * (t0 + t1);
  std::array<Real, 3> out{0.0, 0.0, 0.0};
  for (int i = 0; i < kPairOrder; ++i) {
    const Real s = ms + hs * gl.nodes(i);
    for (int j = 0; j < kPairOrder; ++j) {
      const Real t = mt + ht * gl.nodes(j);
      const Real w = hs * ht * gl.weights(i) * gl.weights(j) * std::pow(t - s, -beta);
      out[0] += w;
      out[1] += w * std::pow(s / h1, degree);
      out[2] += w * std::pow((t - t_start) / h2, degree);
    }
  }
  return out;
}

void refine_pair(LinearEnergyQuadrature::Rule2D& rule, Real s0, Real s1, Real t0, Real t1, Real h1,
                 Real t_start, Real h2, Real beta, Real degree, Real tol, int depth) {
  const auto parent = tensor_moments(s0, s1, t0, t1, h1, t_start, h2, beta, degree);
  const Real sm = 0.5 * (s0 + s1), tm = 0.5 * (t0 + t1);
  std::array<Real, 3> children{0.0, 0.0, 0.0};
  const std::array<std::array<Real, 4>, 4> quads{{{s0, sm, t0, tm}, {sm, s1, t0, tm}, {s0, sm, tm, t1}, {sm, s1, tm, t1}}};
  for (const auto& q : quads) {
    const auto c = tensor_moments(q[0], q[1], q[2], q[3], h1, t_start, h2, beta, degree);
    for (int i = 0; i < 3; ++i) children[i] += c[i];
  }
  bool converged = true;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(parent[i] - children[i]) > tol * std::abs(children[i])) converged = false;
  }
  if (converged || depth <= 0) {
    append_tensor(rule, s0, s1, t0, t1, h1, t_start, h2, beta);
    return;
  }
  for (const auto& q : quads) {
    refine_pair(rule, q[0], q[1], q[2], q[3], h1, t_start, h2, beta, degree, tol, depth - 1);
  }
}

// 1-D rule on r in [0, 1] for the weight (1 + ratio r)^{-beta}.
void refine_angular(LinearEnergyQuadrature::Rule1D& rule, Real r0, Real r1, Real ratio, Real beta,
                    Real degree, Real tol, int depth) {
  const GaussRule& gl = gauss_legendre(kAngularOrder);
  const auto moments = [&](Real a, Real b) {
    const Real h = 0.5 * (b - a), mid = 0.5 * (a + b);
    std::array<Real, 2> out{0.0, 0.0};
    for (int i = 0; i < kAngularOrder; ++i) {
      const Real r = mid + h * gl.nodes(i);
      const Real w = h * gl.weights(i) * std::pow(1.0 + ratio * r, -beta);
      out[0] += w;
      out[1] += w * std::pow(r, degree);
    }
    return out;
  };
  const Real rm = 0.5 * (r0 + r1);
  const auto parent = moments(r0, r1);
  const auto left = moments(r0, rm);
  const auto right = moments(rm, r1);
  bool converged = true;
  for (int i = 0; i < 2; ++i) {
    const Real refined = left[i] + right[i];
    if (std::abs(parent[i] - refined) > tol * std::abs(refined)) converged = false;
  }
  if (converged || depth <= 0) {
    const Real h = 0.5 * (r1 - r0), mid = 0.5 * (r0 + r1);
    for (int i = 0; i < kAngularOrder; ++i) {
      const Real r = mid + h * gl.nodes(i);
      rule.r.push_back(r);
      rule.weight.push_back(h * gl.weights(i) * std::pow(1.0 + ratio * r, -beta));
    }
    return;
  }
  refine_angular(rule, r0, rm, ratio, beta, degree, tol, depth - 1);
  refine_angular(rule, rm, r1, ratio, beta, degree, tol, depth - 1);
}

}  // namespace

// ---------------------------------------------------------------------------
// Specs

void MeasureSpec::validate(Real horizon) const {
  if (kind == Kind::Lebesgue) return;
  for (const Atom& atom : atoms) {
    if (!(atom.time >= 0.0) || atom.time > horizon) {
      throw std::invalid_argument("MeasureSpec: atom time outside [0, T]");
    }
    if (!(atom.weight >= 0.0) || !std::isfinite(atom.weight)) {
      throw std::invalid_argument("MeasureSpec: atom weights must be finite and >= 0");
    }
  }
}

std::string MeasureSpec::describe() const {
  if (kind == Kind::Lebesgue) return "lebesgue";
  std::ostringstream os;
  os << "atoms(" << atoms.size() << ")";
  return os.str();
}

void EnergySpec::validate() const {
  if (kind != EnergyKind::Wfrac) return;
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("p must lie in (1, inf)");
  if (regime == Regime::PiecewiseConstant && !(alpha * p < 1.0)) {
    throw std::invalid_argument("piecewise-constant regime requires alpha < 1/p");
  }
}

std::string EnergySpec::describe() const {
  switch (kind) {
    case EnergyKind::L2:
      return "L2";
    case EnergyKind::H1:
      return "H1";
    case EnergyKind::Wfrac:
      return "Wfrac";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Path energies

Real l2_energy(const RealPath& diff, const MeasureSpec& mu) {
  const TimeGrid& grid = diff.grid;
  mu.validate(grid.horizon());
  if (mu.kind == MeasureSpec::Kind::Lebesgue) {
    Real sum = 0.0;
    for (Index k = 0; k < grid.cells(); ++k) {
      sum += 0.5 * (diff.values(k) * diff.values(k) + diff.values(k + 1) * diff.values(k + 1)) * grid.width(k);
    }
    return sum;
  }
  Real sum = 0.0;
  const Vector& nodes = grid.nodes();
  for (const Atom& atom : mu.atoms) {
    auto it = std::upper_bound(nodes.data(), nodes.data() + nodes.size(), atom.time);
    Index k = std::clamp<Index>(static_cast<Index>(it - nodes.data()) - 1, 0, grid.cells() - 1);
    const Real w = (atom.time - grid.node(k)) / grid.width(k);
    const Real value = (1.0 - w) * diff.values(k) + w * diff.values(k + 1);
    sum += atom.weight * value * value;
  }
  return sum;
}

Real h1_energy(const RealPath& path) {
  Real sum = 0.0;
  for (Index k = 0; k < path.grid.cells(); ++k) {
    const Real dx = path.values(k + 1) - path.values(k);
    sum += dx * dx / path.grid.width(k);
  }
  return sum;
}

Real frac_energy(const RealPath& path, Real alpha, Real p, Regime regime, Real rel_tol) {
  EnergySpec::wfrac(alpha, p, regime).validate();
  if (regime == Regime::PiecewiseConstant) {
    return CellKernel(path.grid, p * alpha + 1.0).energy(path.values, p);
  }
  return LinearEnergyQuadrature(path.grid, alpha, p, rel_tol).evaluate(path.values);
}

// ---------------------------------------------------------------------------
// CellKernel

CellKernel::CellKernel(TimeGrid grid, Real beta) : grid_(std::move(grid)), beta_(beta) {
  if (!(beta > 1.0) || !(beta < 2.0)) {
    throw std::invalid_argument("CellKernel: piecewise-constant weights need beta = p alpha + 1 in (1, 2)");
  }
  const Index m = grid_.cells();
  omega_ = Matrix::Zero(m, m);
  using Wide = long double;
  for (Index k = 0; k < m; ++k) {
    for (Index l = k + 1; l < m; ++l) {
      const Wide w = kernel_cell_weight<Wide>(grid_.node(k), grid_.node(k + 1), grid_.node(l),
                                              grid_.node(l + 1), beta_);
      omega_(k, l) = static_cast<Real>(w);
      omega_(l, k) = omega_(k, l);
    }
  }
  row_sums_ = omega_.rowwise().sum();
}

Real CellKernel::energy(const Eigen::Ref<const Vector>& node_values, Real p) const {
  const Index m = grid_.cells();
  if (node_values.size() != m + 1) throw std::invalid_argument("CellKernel::energy: size mismatch");
  if (p == 2.0) {
    Matrix col = node_values;
    return quadratic_energies(col)(0);
  }
  Real sum = 0.0;
  for (Index k = 0; k < m; ++k) {
    for (Index l = k + 1; l < m; ++l) sum += abs_pow(node_values(k) - node_values(l), p) * omega_(k, l);
  }
  return 2.0 * sum;
}

Vector CellKernel::quadratic_energies(const Matrix& node_values) const {
  const Index m = grid_.cells();
  Matrix cells = node_values.topRows(m);
  cells.rowwise() -= cells.colwise().mean();
  const Matrix mixed = omega_ * cells;
  Vector out(cells.cols());
  for (Index j = 0; j < cells.cols(); ++j) {
    const Real diag = (row_sums_.array() * cells.col(j).array().square()).sum();
    out(j) = std::max(0.0, 2.0 * (diag - cells.col(j).dot(mixed.col(j))));
  }
  return out;
}

Real CellKernel::expected_brownian_energy() const {
  const Index m = grid_.cells();
  Real sum = 0.0;
  for (Index k = 0; k < m; ++k) {
    for (Index l = k + 1; l < m; ++l) sum += (grid_.node(l) - grid_.node(k)) * omega_(k, l);
  }
  return 2.0 * sum;
}

Matrix ramp_gram(const TimeGrid& grid, Real alpha) {
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw std::invalid_argument("ramp_gram: alpha must lie in (0, 1)");
  return ramp_gram_impl<long double>(grid, alpha);
}

// ---------------------------------------------------------------------------
// LinearEnergyQuadrature

LinearEnergyQuadrature::LinearEnergyQuadrature(TimeGrid grid, Real alpha, Real p, Real rel_tol)
    : grid_(std::move(grid)), alpha_(alpha), p_(p), beta_(p * alpha + 1.0), degree_(p - beta_),
      rel_tol_(rel_tol), even_p_(is_even_integer(p)) {
  EnergySpec::wfrac(alpha, p, Regime::PiecewiseLinear).validate();
  const Index m = grid_.cells();
  const Real horizon = grid_.horizon();
  const Real rule_tol = std::max(1e-13, 1e-3 * rel_tol_);
  const Real test_degree = std::max(2.0, std::ceil(p_));

  diag_coef_.resize(m);
  for (Index k = 0; k < m; ++k) {
    const Real h = grid_.width(k);
    diag_coef_(k) = 2.0 * std::pow(h, degree_ + 2.0) / ((degree_ + 1.0) * (degree_ + 2.0));
  }

  std::map<std::tuple<std::int64_t, std::int64_t>, std::shared_ptr<const Rule1D>> angular_cache;
  const auto angular = [&](Real ratio) {
    auto key = std::make_tuple(quantize(ratio, 1.0), std::int64_t{0});
    auto& slot = angular_cache[key];
    if (!slot) {
      auto rule = std::make_shared<Rule1D>();
      refine_angular(*rule, 0.0, 1.0, ratio, beta_, test_degree, rule_tol, 12);
      slot = std::move(rule);
    }
    return slot;
  };
  adjacent_rules_.resize(2 * std::max<Index>(m - 1, 0));
  adjacent_scale_.resize(2 * std::max<Index>(m - 1, 0));
  for (Index k = 0; k + 1 < m; ++k) {
    const Real h1 = grid_.width(k), h2 = grid_.width(k + 1);
    adjacent_rules_[2 * k] = angular(h2 / h1);
    adjacent_rules_[2 * k + 1] = angular(h1 / h2);
    adjacent_scale_(2 * k) = std::pow(h1, degree_ + 2.0) / (degree_ + 2.0) * (h2 / h1);
    adjacent_scale_(2 * k + 1) = std::pow(h2, degree_ + 2.0) / (degree_ + 2.0) * (h1 / h2);
  }

  std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, std::shared_ptr<const Rule2D>> cache;
  pair_offset_.assign(m + 1, 0);
  for (Index k = 0; k < m; ++k) {
    pair_offset_[k + 1] = pair_offset_[k] + std::max<Index>(m - k - 2, 0);
  }
  pair_rules_.resize(pair_offset_[m]);
  for (Index k = 0; k < m; ++k) {
    for (Index l = k + 2; l < m; ++l) {
      const Real h1 = grid_.width(k), h2 = grid_.width(l);
      const Real gap = grid_.node(l) - grid_.node(k + 1);
      auto key = std::make_tuple(quantize(h1, horizon), quantize(h2, horizon), quantize(gap, horizon));
      auto& slot = cache[key];
      if (!slot) {
        auto rule = std::make_shared<Rule2D>();
        const Real t_start = h1 + gap;
        refine_pair(*rule, 0.0, h1, t_start, t_start + h2, h1, t_start, h2, beta_, test_degree, rule_tol, 8);
        slot = std::move(rule);
      }
      pair_rules_[pair_offset_[k] + (l - k - 2)] = slot;
    }
  }

  if (!even_p_) return;
  const int order = static_cast<int>(p_);
  const auto factorial = [](int n) {
    Real f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  };
  for (int ib = 0; ib <= order; ++ib) {
    for (int it = 0; ib + it <= order; ++it) {
      const int is = order - ib - it;
      terms_.push_back({ib, it, is, factorial(order) / (factorial(ib) * factorial(it) * factorial(is))});
    }
  }
  gap_moments_.assign(m, Matrix());
  for (Index gap = 2; gap < m; ++gap) {
    const Rule2D* shared = pair_rules_[pair_offset_[0] + (gap - 2)].get();
    bool uniform = true;
    for (Index k = 1; k + gap < m && uniform; ++k) uniform = pair_rules_[pair_offset_[k] + (gap - 2)].get() == shared;
    if (!uniform) continue;
    Matrix moments = Matrix::Zero(order + 1, order + 1);
    for (std::size_t n = 0; n < shared->weight.size(); ++n) {
      Real sp = 1.0;
      for (int i = 0; i <= order; ++i) {
        Real tp = 1.0;
        for (int j = 0; i + j <= order; ++j) {
          moments(i, j) += shared->weight[n] * sp * tp;
          tp *= shared->t_frac[n];
        }
        sp *= shared->s_frac[n];
      }
    }
    gap_moments_[gap] = std::move(moments);
  }
}

Real LinearEnergyQuadrature::diagonal_by_moments(Index gap, const Vector& v, const Vector& inc,
                                                 Matrix& work) const {
  const Index len = grid_.cells() - gap;
  const int order = static_cast<int>(p_);
  const Matrix& moments = gap_moments_[gap];
  // f = b + c t - d s on pair (k, k + gap), with b = v_l - v_k, c = inc_l, d = inc_k.
  // Columns of `work`: powers 1..p of b, then of c, then of -d.
  auto power = [&](int which, int e) { return work.col(which * order + e - 1).head(len).array(); };
  power(0, 1) = v.segment(gap, len) - v.head(len);
  power(1, 1) = inc.segment(gap, len);
  power(2, 1) = -inc.head(len);
  for (int which = 0; which < 3; ++which) {
    for (int e = 2; e <= order; ++e) power(which, e) = power(which, e - 1) * power(which, 1);
  }
  Real sum = 0.0;
  for (const Term& term : terms_) {
    const Real weight = term.coef * moments(term.s, term.t);
    const int nonzero = (term.b > 0) + (term.t > 0) + (term.s > 0);
    Real partial;
    if (nonzero == 1) {
      partial = term.b ? power(0, term.b).sum() : term.t ? power(1, term.t).sum() : power(2, term.s).sum();
    } else if (term.s == 0) {
      partial = (power(0, term.b) * power(1, term.t)).sum();
    } else if (term.t == 0) {
      partial = (power(0, term.b) * power(2, term.s)).sum();
    } else if (term.b == 0) {
      partial = (power(1, term.t) * power(2, term.s)).sum();
    } else {
      partial = (power(0, term.b) * power(1, term.t) * power(2, term.s)).sum();
    }
    sum += weight * partial;
  }
  return sum;
}

Real LinearEnergyQuadrature::separated_pair(Index k, Index l, const Rule2D& rule, const Vector& v,
                                            const Vector& inc) const {
  const Real base = v(l) - v(k);
  const Real dk = inc(k), dl = inc(l);
  Real sum = 0.0;
  const std::size_t n = rule.weight.size();
  if (p_ == 2.0) {
    for (std::size_t i = 0; i < n; ++i) {
      const Real diff = base + rule.t_frac[i] * dl - rule.s_frac[i] * dk;
      sum += rule.weight[i] * diff * diff;
    }
  } else if (p_ == 4.0) {
    for (std::size_t i = 0; i < n; ++i) {
      const Real diff = base + rule.t_frac[i] * dl - rule.s_frac[i] * dk;
      const Real d2 = diff * diff;
      sum += rule.weight[i] * d2 * d2;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      sum += rule.weight[i] * abs_pow(base + rule.t_frac[i] * dl - rule.s_frac[i] * dk, p_);
    }
  }
  return sum;
}

Real LinearEnergyQuadrature::separated_pair_adaptive(Index k, Index l, const Vector& v,
                                                     const Vector& inc) const {
  const Real xk = grid_.node(k), hk = grid_.width(k);
  const Real xl = grid_.node(l), hl = grid_.width(l);
  const GaussRule& gl = gauss_legendre(kPairOrder);
  const auto rect = [&](Real s0, Real s1, Real t0, Real t1) {
    const Real hs = 0.5 * (s1 - s0), ms = 0.5 * (s0 + s1);
    const Real ht = 0.5 * (t1 - t0), mt = 0.5 * (t0 + t1);
    Real sum = 0.0;
    for (int i = 0; i < kPairOrder; ++i) {
      const Real s = ms + hs * gl.nodes(i);
      const Real fs = v(k) + (s - xk) / hk * inc(k);
      for (int j = 0; j < kPairOrder; ++j) {
        const Real t = mt + ht * gl.nodes(j);
        const Real ft = v(l) + (t - xl) / hl * inc(l);
        sum += gl.weights(i) * gl.weights(j) * abs_pow(ft - fs, p_) * std::pow(t - s, -beta_);
      }
    }
    return hs * ht * sum;
  };
  const std::function<Real(Real, Real, Real, Real, Real, int)> recurse =
      [&](Real s0, Real s1, Real t0, Real t1, Real whole, int depth) -> Real {
    const Real sm = 0.5 * (s0 + s1), tm = 0.5 * (t0 + t1);
    const std::array<Real, 4> parts{rect(s0, sm, t0, tm), rect(sm, s1, t0, tm), rect(s0, sm, tm, t1),
                                    rect(sm, s1, tm, t1)};
    const Real refined = parts[0] + parts[1] + parts[2] + parts[3];
    if (depth <= 0 || std::abs(refined - whole) <= 1e-3 * rel_tol_ * std::abs(refined) + 1e-300) {
      return refined;
    }
    return recurse(s0, sm, t0, tm, parts[0], depth - 1) + recurse(sm, s1, t0, tm, parts[1], depth - 1) +
           recurse(s0, sm, tm, t1, parts[2], depth - 1) + recurse(sm, s1, tm, t1, parts[3], depth - 1);
  };
  const Real s1 = xk + hk, t1 = xl + hl;
  return recurse(xk, s1, xl, t1, rect(xk, s1, xl, t1), 10);
}

Real LinearEnergyQuadrature::adjacent_pair(Index k, const Vector& slope) const {
  const Real sk = slope(k), sl = slope(k + 1);
  const Real h1 = grid_.width(k), h2 = grid_.width(k + 1);
  // Triangle 1: |sk + sl * y|^p with y = r h2/h1. Triangle 2: |sk * x + sl|^p with x = r h1/h2.
  const auto triangle = [&](const Rule1D& rule, Real lead, Real trail, Real ratio) {
    const Real end_value = lead + trail * ratio;
    const bool sign_change = !even_p_ && lead * end_value < 0.0;
    if (!sign_change) {
      Real sum = 0.0;
      for (std::size_t i = 0; i < rule.r.size(); ++i) sum += rule.weight[i] * abs_pow(lead + trail * ratio * rule.r[i], p_);
      return sum;
    }
    const Real root = -lead / (trail * ratio);
    const auto f = [&](Real r) { return abs_pow(lead + trail * ratio * r, p_) * std::pow(1.0 + ratio * r, -beta_); };
    return integrate_adaptive(f, 0.0, root, 1e-3 * rel_tol_) + integrate_adaptive(f, root, 1.0, 1e-3 * rel_tol_);
  };
  return adjacent_scale_(2 * k) * triangle(*adjacent_rules_[2 * k], sk, sl, h2 / h1) +
         adjacent_scale_(2 * k + 1) * triangle(*adjacent_rules_[2 * k + 1], sl, sk, h1 / h2);
}

Real LinearEnergyQuadrature::evaluate(const Eigen::Ref<const Vector>& node_values) const {
  const Index m = grid_.cells();
  if (node_values.size() != m + 1) throw std::invalid_argument("LinearEnergyQuadrature: size mismatch");
  const Vector v = node_values;
  const Vector inc = v.tail(m) - v.head(m);
  const Vector slope = inc.array() / grid_.widths().array();

  Real diag = 0.0;
  for (Index k = 0; k < m; ++k) diag += abs_pow(slope(k), p_) * diag_coef_(k);
  Real off = 0.0;
  for (Index k = 0; k + 1 < m; ++k) off += adjacent_pair(k, slope);
  Matrix work;
  if (even_p_) work.resize(m, 3 * static_cast<Index>(p_));
  for (Index gap = 2; gap < m; ++gap) {
    if (even_p_ && gap_moments_[gap].size() > 0) {
      off += diagonal_by_moments(gap, v, inc, work);
      continue;
    }
    for (Index k = 0; k + gap < m; ++k) {
      const Index l = k + gap;
      if (!even_p_) {
        // f_t - f_s is affine on the rectangle; a sign change shows at the corners.
        const Real c00 = v(l) - v(k), c10 = v(l) - v(k + 1), c01 = v(l + 1) - v(k), c11 = v(l + 1) - v(k + 1);
        const Real lo = std::min({c00, c10, c01, c11}), hi = std::max({c00, c10, c01, c11});
        if (lo < 0.0 && hi > 0.0) {
          off += separated_pair_adaptive(k, l, v, inc);
          continue;
        }
      }
      off += separated_pair(k, l, *pair_rules_[pair_offset_[k] + (l - k - 2)], v, inc);
    }
  }
  return diag + 2.0 * off;
}

// ---------------------------------------------------------------------------
// EnergyEvaluator

EnergyEvaluator::EnergyEvaluator(EnergySpec spec, TimeGrid grid) : spec_(std::move(spec)), grid_(std::move(grid)) {
  spec_.validate();
  switch (spec_.kind) {
    case EnergyKind::L2:
      spec_.mu.validate(grid_.horizon());
      if (spec_.mu.kind == MeasureSpec::Kind::Lebesgue) {
        l2_weights_ = Vector::Zero(grid_.size());
        for (Index k = 0; k < grid_.cells(); ++k) {
          l2_weights_(k) += 0.5 * grid_.width(k);
          l2_weights_(k + 1) += 0.5 * grid_.width(k);
        }
      }
      break;
    case EnergyKind::H1:
      break;
    case EnergyKind::Wfrac:
      if (spec_.regime == Regime::PiecewiseConstant) {
        cell_kernel_.emplace(grid_, spec_.p * spec_.alpha + 1.0);
      } else if (spec_.p == 2.0) {
        gram_ = ramp_gram(grid_, spec_.alpha);
      } else {
        quadrature_ = std::make_shared<LinearEnergyQuadrature>(grid_, spec_.alpha, spec_.p);
      }
      break;
  }
}

Real EnergyEvaluator::operator()(const Eigen::Ref<const Vector>& node_values) const {
  Matrix col = node_values;
  return batch(col)(0);
}

Vector EnergyEvaluator::batch(const Matrix& node_values) const {
  if (node_values.rows() != grid_.size()) throw std::invalid_argument("EnergyEvaluator: size mismatch");
  const Index m = grid_.cells();
  const Index n = node_values.cols();
  Vector out(n);
  switch (spec_.kind) {
    case EnergyKind::L2:
      if (spec_.mu.kind == MeasureSpec::Kind::Lebesgue) {
        out = (node_values.array().square().colwise() * l2_weights_.array()).colwise().sum().transpose();
      } else {
        for (Index j = 0; j < n; ++j) out(j) = l2_energy({grid_, node_values.col(j)}, spec_.mu);
      }
      break;
    case EnergyKind::H1: {
      const Matrix inc = node_values.bottomRows(m) - node_values.topRows(m);
      const Vector inv_width = grid_.widths().cwiseInverse();
      out = (inc.array().square().colwise() * inv_width.array()).colwise().sum().transpose();
      break;
    }
    case EnergyKind::Wfrac:
      if (cell_kernel_) {
        if (spec_.p == 2.0) {
          out = cell_kernel_->quadratic_energies(node_values);
        } else {
          for (Index j = 0; j < n; ++j) out(j) = cell_kernel_->energy(node_values.col(j), spec_.p);
        }
      } else if (quadrature_) {
        for (Index j = 0; j < n; ++j) out(j) = quadrature_->evaluate(node_values.col(j));
      } else {
        const Vector inv_width = grid_.widths().cwiseInverse();
        const Matrix slopes = (node_values.bottomRows(m) - node_values.topRows(m)).array().colwise() *
                              inv_width.array();
        const Matrix mixed = gram_ * slopes;
        out = (slopes.array() * mixed.array()).colwise().sum().transpose();
        out = out.cwiseMax(0.0);
      }
      break;
  }
  return out;
}

}  // namespace fracstein
