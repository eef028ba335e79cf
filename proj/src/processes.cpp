#include "fracstein/processes.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace fracstein {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Cell containing t (clamped to the grid).
Index locate(const Vector& nodes, Real t) {
  const auto* begin = nodes.data();
  const auto* end = begin + nodes.size();
  auto it = std::upper_bound(begin, end, t);
  Index k = static_cast<Index>(it - begin) - 1;
  return std::clamp<Index>(k, 0, nodes.size() - 2);
}

}  // namespace

// ---------------------------------------------------------------------------
// TimeGrid

TimeGrid::TimeGrid(Vector nodes) {
  if (nodes.size() < 3) throw std::invalid_argument("TimeGrid: need at least 2 cells");
  if (nodes(0) != 0.0) throw std::invalid_argument("TimeGrid: first node must be 0");
  for (Index k = 1; k < nodes.size(); ++k) {
    if (!(nodes(k) > nodes(k - 1)) || !std::isfinite(nodes(k))) {
      throw std::invalid_argument("TimeGrid: nodes must be finite and strictly increasing");
    }
  }
  nodes_ = std::make_shared<const Vector>(std::move(nodes));
}

Vector TimeGrid::widths() const {
  return nodes_->tail(cells()) - nodes_->head(cells());
}

std::optional<Index> TimeGrid::find_node(Real t, Real rel_tol) const {
  const Real tol = rel_tol * horizon();
  const auto* begin = nodes_->data();
  const auto* end = begin + nodes_->size();
  auto it = std::lower_bound(begin, end, t - tol);
  if (it != end && std::abs(*it - t) <= tol) return static_cast<Index>(it - begin);
  return std::nullopt;
}

bool TimeGrid::operator==(const TimeGrid& other) const {
  return nodes_ == other.nodes_ || *nodes_ == *other.nodes_;
}

TimeGrid make_uniform_grid(Real horizon, Index cells) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("make_uniform_grid: T must be > 0");
  }
  if (cells < 2) throw std::invalid_argument("make_uniform_grid: m must be >= 2");
  Vector nodes(cells + 1);
  for (Index k = 0; k <= cells; ++k) nodes(k) = horizon * static_cast<Real>(k) / static_cast<Real>(cells);
  nodes(cells) = horizon;
  return TimeGrid(std::move(nodes));
}

// ---------------------------------------------------------------------------
// CountingPath

CountingPath::CountingPath(TimeGrid grid, std::vector<Real> jump_times)
    : grid_(std::move(grid)), jumps_(std::move(jump_times)) {
  for (std::size_t i = 0; i < jumps_.size(); ++i) {
    if (!(jumps_[i] > 0.0) || jumps_[i] > grid_.horizon()) {
      throw std::invalid_argument("CountingPath: jump times must lie in (0, T]");
    }
    if (i > 0 && !(jumps_[i] > jumps_[i - 1])) {
      throw std::invalid_argument("CountingPath: jump times must be strictly increasing");
    }
  }
}

Vector CountingPath::counts() const {
  Vector out(grid_.size());
  std::size_t j = 0;
  for (Index k = 0; k < grid_.size(); ++k) {
    while (j < jumps_.size() && jumps_[j] <= grid_.node(k)) ++j;
    out(k) = static_cast<Real>(j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// DriftSpec

DriftSpec DriftSpec::zero() { return DriftSpec(Affine{0.0, 0.0}); }

DriftSpec DriftSpec::affine_rate(Real c0, Real c1) { return DriftSpec(Affine{c0, c1}); }

DriftSpec DriftSpec::sine(Real amplitude, Real frequency) {
  return DriftSpec(Sine{amplitude, frequency});
}

DriftSpec DriftSpec::sampled(TimeGrid grid, Vector rates) {
  if (rates.size() != grid.size()) {
    throw std::invalid_argument("DriftSpec::sampled: one rate per grid node required");
  }
  if (!rates.allFinite()) throw std::invalid_argument("DriftSpec::sampled: rates must be finite");
  Vector primitive(grid.size());
  primitive(0) = 0.0;
  for (Index k = 0; k < grid.cells(); ++k) {
    primitive(k + 1) = primitive(k) + 0.5 * (rates(k) + rates(k + 1)) * grid.width(k);
  }
  return DriftSpec(Sampled{std::move(grid), std::move(rates), std::move(primitive)});
}

Real DriftSpec::rate(Real t) const {
  return std::visit(Overloaded{
                        [t](const Affine& f) { return f.c0 + f.c1 * t; },
                        [t](const Sine& f) { return f.amplitude * f.frequency * std::cos(f.frequency * t); },
                        [t](const Sampled& f) {
                          const Index k = locate(f.grid.nodes(), t);
                          const Real w = (t - f.grid.node(k)) / f.grid.width(k);
                          return (1.0 - w) * f.rates(k) + w * f.rates(k + 1);
                        },
                    },
                    form_);
}

Real DriftSpec::value(Real t) const {
  return std::visit(Overloaded{
                        [t](const Affine& f) { return f.c0 * t + 0.5 * f.c1 * t * t; },
                        [t](const Sine& f) { return f.amplitude * std::sin(f.frequency * t); },
                        [t](const Sampled& f) {
                          const Index k = locate(f.grid.nodes(), t);
                          const Real dt = t - f.grid.node(k);
                          const Real slope = (f.rates(k + 1) - f.rates(k)) / f.grid.width(k);
                          return f.primitive(k) + f.rates(k) * dt + 0.5 * slope * dt * dt;
                        },
                    },
                    form_);
}

Vector DriftSpec::values_on(const TimeGrid& grid) const {
  Vector out(grid.size());
  for (Index k = 0; k < grid.size(); ++k) out(k) = value(grid.node(k));
  out(0) = 0.0;
  return out;
}

Vector DriftSpec::rates_on(const TimeGrid& grid) const {
  Vector out(grid.size());
  for (Index k = 0; k < grid.size(); ++k) out(k) = rate(grid.node(k));
  return out;
}

bool DriftSpec::is_zero() const {
  if (const auto* f = std::get_if<Affine>(&form_)) return f->c0 == 0.0 && f->c1 == 0.0;
  if (const auto* f = std::get_if<Sine>(&form_)) return f->amplitude == 0.0;
  return std::get<Sampled>(form_).rates.isZero(0.0);
}

std::string DriftSpec::describe() const {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const Affine& f) {
                   if (f.c0 == 0.0 && f.c1 == 0.0) {
                     os << "zero";
                   } else if (f.c1 == 0.0) {
                     os << "linear(" << f.c0 << ")";
                   } else {
                     os << "affine_rate(" << f.c0 << "," << f.c1 << ")";
                   }
                 },
                 [&](const Sine& f) { os << "sine(" << f.amplitude << "," << f.frequency << ")"; },
                 [&](const Sampled& f) { os << "sampled(" << f.rates.size() << ")"; },
             },
             form_);
  return os.str();
}

// ---------------------------------------------------------------------------
// IntensitySpec

IntensitySpec::IntensitySpec(Real c0, Real c1, std::optional<GammaLaw> law,
                             std::optional<Real> base_max)
    : c0_(c0), c1_(c1), law_(law), base_max_(base_max) {
  if (law_ && (!(law_->shape > 0.0) || !(law_->scale > 0.0))) {
    throw std::invalid_argument("IntensitySpec: gamma shape and scale must be > 0");
  }
  if (base_max_ && !(*base_max_ >= 0.0)) {
    throw std::invalid_argument("IntensitySpec: lambda_max must be >= 0");
  }
}

IntensitySpec IntensitySpec::deterministic(Real c0, Real c1, std::optional<Real> base_max) {
  return IntensitySpec(c0, c1, std::nullopt, base_max);
}

IntensitySpec IntensitySpec::random_scaled(GammaLaw law, Real c0, Real c1,
                                           std::optional<Real> base_max) {
  return IntensitySpec(c0, c1, law, base_max);
}

Real IntensitySpec::base_bound(Real horizon) const {
  if (base_max_) return *base_max_;
  return std::max(base_rate(0.0), base_rate(horizon));
}

void IntensitySpec::validate(Real horizon) const {
  if (!(base_rate(0.0) >= 0.0) || !(base_rate(horizon) >= 0.0)) {
    throw std::invalid_argument("IntensitySpec: base intensity must be >= 0 on [0, T]");
  }
}

std::string IntensitySpec::describe() const {
  std::ostringstream os;
  if (law_) os << "gamma(" << law_->shape << "," << law_->scale << ")*";
  os << "(" << c0_;
  if (c1_ != 0.0) os << "+" << c1_ << "t";
  os << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// Simulation and likelihood ratios

RealPath simulate_bm(const TimeGrid& grid, Engine& engine) {
  std::normal_distribution<Real> normal(0.0, 1.0);
  Vector values(grid.size());
  values(0) = 0.0;
  for (Index k = 0; k < grid.cells(); ++k) {
    values(k + 1) = values(k) + std::sqrt(grid.width(k)) * normal(engine);
  }
  return {grid, std::move(values)};
}

RealPath shift_by_drift(const RealPath& path, const DriftSpec& drift) {
  if (path.values.size() != path.grid.size()) {
    throw std::invalid_argument("shift_by_drift: path does not match its grid");
  }
  return {path.grid, path.values + drift.values_on(path.grid)};
}

Real girsanov_weight_gaussian(const RealPath& path, const DriftSpec& drift) {
  Real stochastic = 0.0;
  Real energy = 0.0;
  for (Index k = 0; k < path.grid.cells(); ++k) {
    const Real r = drift.rate(path.grid.node(k));
    stochastic += r * (path.values(k + 1) - path.values(k));
    energy += r * r * path.grid.width(k);
  }
  return std::exp(stochastic - 0.5 * energy);
}

CoxDraw simulate_cox(const TimeGrid& grid, const IntensitySpec& intensity, Engine& engine) {
  const Real horizon = grid.horizon();
  intensity.validate(horizon);
  Real multiplier = 1.0;
  if (const auto& law = intensity.multiplier_law()) {
    std::gamma_distribution<Real> gamma(law->shape, law->scale);
    multiplier = gamma(engine);
  }
  const Real base_max = intensity.base_bound(horizon);
  const Real dominating = multiplier * base_max;
  std::vector<Real> jumps;
  if (dominating > 0.0) {
    std::exponential_distribution<Real> gap(dominating);
    std::uniform_real_distribution<Real> uniform(0.0, 1.0);
    Real t = 0.0;
    while (true) {
      t += gap(engine);
      if (t > horizon) break;
      const Real base = intensity.base_rate(t);
      if (base > base_max) {
        throw NumericError("simulate_cox: intensity exceeds lambda_max (thinning bound violated)");
      }
      if (uniform(engine) * base_max < base) jumps.push_back(t);
    }
  }
  return {CountingPath(grid, std::move(jumps)), multiplier};
}

Real girsanov_weight_cox(const CountingPath& path, const std::function<Real(Real)>& rate) {
  Real log_weight = 0.0;
  for (Real t : path.jump_times()) {
    const Real r = rate(t);
    if (!(r > 0.0)) throw std::invalid_argument("girsanov_weight_cox: intensity must be > 0 at jump times");
    log_weight += std::log(r);
  }
  const TimeGrid& grid = path.grid();
  Real compensator = 0.0;
  Real left = rate(grid.node(0)) - 1.0;
  for (Index k = 0; k < grid.cells(); ++k) {
    const Real right = rate(grid.node(k + 1)) - 1.0;
    compensator += 0.5 * (left + right) * grid.width(k);
    left = right;
  }
  return std::exp(log_weight - compensator);
}

}  // namespace fracstein
