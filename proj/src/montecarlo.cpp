#include "fracstein/montecarlo.hpp"

#include "fracstein/cramer_rao.hpp"
#include "fracstein/parallel.hpp"
#include "fracstein/rng.hpp"
#include "fracstein/statistics.hpp"

#include <cmath>
#include <memory>

namespace fracstein {

namespace {

constexpr Index kBlock = 64;
constexpr Index kFirstCheckpoint = 100;

bool is_quadratic_wfrac(const EnergySpec& e) { return e.kind == EnergyKind::Wfrac && e.p == 2.0; }

// Exact expected energy of the Brownian-bridge fluctuations between grid
// nodes: E||W||^2 - E||W_lin||^2 = rho - sum_k G_kk / h_k.
Real subgrid_energy(const EnergyEvaluator& evaluator) {
  const TimeGrid& grid = evaluator.grid();
  const Real rho = kernel_double_integral(grid.horizon(), evaluator.spec().alpha);
  const Vector widths = grid.widths();
  return rho - (evaluator.gram().diagonal().array() / widths.array()).sum();
}

}  // namespace

std::string to_string(Model model) { return model == Model::Gaussian ? "gaussian" : "cox"; }

std::string to_string(EstimatorKind estimator) { return estimator == EstimatorKind::Identity ? "X" : "stein"; }

void ExperimentSpec::validate() const {
  if (reps < 100) throw std::invalid_argument("reps >= 100 required");
  energy.validate();
  if (energy.kind == EnergyKind::L2) energy.mu.validate(grid.horizon());
  if (model == Model::Cox) {
    intensity.validate(grid.horizon());
    if (energy.kind == EnergyKind::Wfrac && energy.p != 2.0) {
      throw std::invalid_argument("cox model supports L2, H1 and W^{alpha,2} energies (p = 2)");
    }
  }
  if (estimator == EstimatorKind::Stein) {
    if (model != Model::Gaussian) throw std::invalid_argument("stein estimator requires the gaussian model");
    if (!stein) throw std::invalid_argument("stein estimator requires a stein configuration");
    stein->validate();
    if (std::abs(stein->horizon() - grid.horizon()) > 1e-12 * grid.horizon()) {
      throw std::invalid_argument("stein coarse grid and simulation grid must share T");
    }
    for (Index i = 0; i < stein->coarse.size(); ++i) {
      if (!grid.find_node(stein->coarse.node(i))) {
        throw std::invalid_argument("stein coarse nodes must be simulation grid nodes (m divisible by n)");
      }
    }
  }
  if (energy.subgrid_correction) {
    if (model != Model::Gaussian || !is_quadratic_wfrac(energy) || energy.regime != Regime::PiecewiseLinear ||
        !(energy.alpha < 0.5)) {
      throw std::invalid_argument(
          "subgrid_correction requires the gaussian model, W^{alpha,2}, piecewise-linear, alpha < 1/2");
    }
  }
}

Real experiment_bound(const ExperimentSpec& spec) {
  const Real horizon = spec.grid.horizon();
  const EnergySpec& e = spec.energy;
  if (e.kind == EnergyKind::H1) return kInfinity<Real>;
  if (spec.model == Model::Gaussian) {
    if (e.kind == EnergyKind::L2) return cr_l2_gaussian(e.mu, horizon);
    if (e.p == 2.0) return cr_w2alpha_gaussian(horizon, e.alpha);
    return cr_walphap_gaussian(horizon, e.alpha, e.p);
  }
  if (e.kind == EnergyKind::L2) return cr_l2_cox(spec.intensity, e.mu, horizon);
  return cr_w2alpha_cox(spec.intensity, horizon, e.alpha);
}

std::vector<Real> replicate_energies(const ExperimentSpec& spec) {
  spec.validate();
  const TimeGrid& grid = spec.grid;
  const EnergyEvaluator evaluator(spec.energy, grid);
  const Real offset = spec.energy.subgrid_correction ? subgrid_energy(evaluator) : 0.0;
  std::unique_ptr<SteinOperator> stein;
  if (spec.estimator == EstimatorKind::Stein) stein = std::make_unique<SteinOperator>(*spec.stein);
  const Vector u = spec.drift.values_on(grid);
  const Vector nodes = grid.nodes();

  std::vector<Real> energies(spec.reps);
  for_each_block(
      spec.reps, kBlock,
      [&](Index begin, Index end) {
        Matrix diffs(grid.size(), end - begin);
        for (Index r = begin; r < end; ++r) {
          Engine engine(spec.seed, static_cast<std::uint64_t>(r));
          auto col = diffs.col(r - begin);
          if (spec.model == Model::Gaussian) {
            const RealPath x = shift_by_drift(simulate_bm(grid, engine), spec.drift);
            if (stein) {
              col = shrunk_estimator(x, *stein).values - u;
            } else {
              col = x.values - u;
            }
          } else {
            const CoxDraw draw = simulate_cox(grid, spec.intensity, engine);
            const Vector counts = draw.path.counts();
            for (Index k = 0; k < grid.size(); ++k) {
              col(k) = counts(k) - draw.multiplier * spec.intensity.base_compensator(nodes(k));
            }
          }
        }
        const Vector e = evaluator.batch(diffs);
        for (Index r = begin; r < end; ++r) energies[r] = e(r - begin) + offset;
      },
      spec.workers);
  return energies;
}

RiskReport estimate_risk(const ExperimentSpec& spec) {
  const std::vector<Real> energies = replicate_energies(spec);
  const SampleSummary s = summarize(energies);
  RiskReport report;
  report.estimate = s.mean;
  report.std_error = s.std_error;
  report.ci_lo = s.mean - 1.96 * s.std_error;
  report.ci_hi = s.mean + 1.96 * s.std_error;
  report.bound = experiment_bound(spec);
  if (std::isfinite(report.bound) && report.bound > 0.0) report.ratio = report.estimate / report.bound;
  report.reps = spec.reps;
  report.seed = spec.seed;
  report.m = spec.grid.cells();
  const std::span<const Real> all(energies);
  for (Index n = kFirstCheckpoint; n < spec.reps; n *= 2) {
    const SampleSummary p = summarize(all.first(n));
    report.trace.push_back({n, p.mean, p.std_error});
  }
  report.trace.push_back({spec.reps, s.mean, s.std_error});
  return report;
}

std::vector<DivergenceRow> divergence_probe(Model model, const EnergySpec& energy,
                                            const std::vector<Index>& resolutions, Index reps,
                                            std::uint64_t seed, Real horizon, int workers) {
  if (resolutions.size() < 3) throw std::invalid_argument("divergence_probe: at least 3 resolutions required");
  for (std::size_t i = 1; i < resolutions.size(); ++i) {
    if (resolutions[i] != 2 * resolutions[i - 1]) {
      throw std::invalid_argument("divergence_probe: each resolution must double the previous one");
    }
  }
  std::vector<DivergenceRow> rows;
  for (Index m : resolutions) {
    ExperimentSpec spec;
    spec.model = model;
    spec.energy = energy;
    spec.grid = make_uniform_grid(horizon, m);
    spec.reps = reps;
    spec.seed = seed;
    spec.workers = workers;
    const SampleSummary s = summarize(replicate_energies(spec));
    rows.push_back({m, s.mean, s.std_error});
  }
  return rows;
}

std::vector<SuperEfficiencyRow> super_efficiency_experiment(const SteinConfig& config,
                                                            const std::vector<DriftSpec>& drifts, Index m,
                                                            Index reps, std::uint64_t seed, int workers) {
  config.validate();
  const SteinOperator op(config);
  std::vector<SuperEfficiencyRow> rows;
  for (const DriftSpec& drift : drifts) {
    ExperimentSpec spec;
    spec.model = Model::Gaussian;
    spec.drift = drift;
    spec.estimator = EstimatorKind::Stein;
    spec.stein = config;
    spec.energy = EnergySpec::wfrac(config.alpha, 2.0, Regime::PiecewiseLinear);
    spec.energy.subgrid_correction = true;
    spec.grid = make_uniform_grid(config.horizon(), m);
    spec.reps = reps;
    spec.seed = seed;
    spec.workers = workers;

    SuperEfficiencyRow row;
    row.drift = drift.describe();
    row.risk = estimate_risk(spec);
    row.predicted = predicted_risk(op, drift, reps, derive_seed(seed, 1), workers);
    row.below_bound = row.risk.estimate < row.risk.bound - 3.0 * row.risk.std_error;
    const Real joint = std::hypot(row.risk.std_error, row.predicted.risk_stderr);
    row.matches_prediction = std::abs(row.risk.estimate - row.predicted.risk) <= 3.0 * joint;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace fracstein
