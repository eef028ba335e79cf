#pragma once

#include "fracstein/processes.hpp"
#include "fracstein/sobolev_energy.hpp"
#include "fracstein/stein.hpp"
#include "fracstein/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fracstein {

enum class Model { Gaussian, Cox };
enum class EstimatorKind { Identity, Stein };

std::string to_string(Model model);
std::string to_string(EstimatorKind estimator);

struct ExperimentSpec {
  Model model = Model::Gaussian;
  DriftSpec drift = DriftSpec::zero();
  IntensitySpec intensity = IntensitySpec::deterministic(1.0);
  EstimatorKind estimator = EstimatorKind::Identity;
  std::optional<SteinConfig> stein;
  EnergySpec energy;
  TimeGrid grid = make_uniform_grid(1.0, 64);
  Index reps = 1000;
  std::uint64_t seed = 1;
  int workers = 0;  // 0: default_workers(); never affects the numbers

  void validate() const;
};

struct TracePoint {
  Index reps;
  Real estimate;
  Real std_error;
};

struct RiskReport {
  Real estimate = 0.0;
  Real std_error = 0.0;
  Real ci_lo = 0.0;
  Real ci_hi = 0.0;
  Real bound = 0.0;              // +inf when no unbiased estimator has finite risk
  std::optional<Real> ratio;     // estimate / bound when the bound is finite and > 0
  Index reps = 0;
  std::uint64_t seed = 0;
  Index m = 0;
  std::vector<TracePoint> trace;  // running estimate at increasing replication counts
};

// Cramer-Rao bound for the experiment's model and energy.
Real experiment_bound(const ExperimentSpec& spec);

// Mean over replications of energy(estimator(X) - u). Replication r draws
// from stream r of the engine keyed by spec.seed.
RiskReport estimate_risk(const ExperimentSpec& spec);

// Per-replication energies behind estimate_risk, in replication order.
std::vector<Real> replicate_energies(const ExperimentSpec& spec);

struct DivergenceRow {
  Index m;
  Real mean;
  Real std_error;
};

// Mean discrete energy of X - u (u = 0, unit-rate Cox intensity) at each
// resolution of a uniform grid on [0, horizon].
std::vector<DivergenceRow> divergence_probe(Model model, const EnergySpec& energy,
                                            const std::vector<Index>& resolutions, Index reps,
                                            std::uint64_t seed, Real horizon = 1.0, int workers = 0);

struct SuperEfficiencyRow {
  std::string drift;
  RiskReport risk;
  PredictedRisk predicted;
  bool below_bound = false;  // estimate < bound by at least 3 standard errors
  bool matches_prediction = false;  // |estimate - predicted| <= 3 joint standard errors
};

// Risk of X + xi in W^{alpha,2} on a uniform grid with m cells (a multiple of
// the coarse cell count) for each drift, with the bound and predicted risk.
std::vector<SuperEfficiencyRow> super_efficiency_experiment(const SteinConfig& config,
                                                            const std::vector<DriftSpec>& drifts, Index m,
                                                            Index reps, std::uint64_t seed, int workers = 0);

}  // namespace fracstein
