#pragma once

#include "fracstein/montecarlo.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracstein {

// Raised for configuration documents that fail schema or domain validation.
// The message starts with the JSON path of the offending value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentType { Risk, Divergence, SuperEfficiency, Bound };

struct ExperimentEntry {
  std::string name;
  ExperimentType type = ExperimentType::Risk;
  ExperimentSpec spec;
  std::vector<Index> resolutions;  // divergence
  std::vector<DriftSpec> drifts;   // super_efficiency
};

struct Config {
  std::vector<ExperimentEntry> experiments;
};

Config parse_config(const nlohmann::json& doc);
Config load_config(const std::filesystem::path& path);

// One flat result row; a divergence experiment yields one row per
// resolution and a super-efficiency experiment one row per drift.
struct ResultRecord {
  std::string experiment;
  ExperimentType type = ExperimentType::Risk;
  std::string model, estimator, energy;
  std::optional<Real> alpha, p;
  Index m = 0;
  std::optional<RiskReport> report;  // empty for bound-only experiments
  Real bound = 0.0;
  nlohmann::json extra = nlohmann::json::object();
};

// Runs every experiment in order. Throws NumericError on numeric failure.
std::vector<ResultRecord> run_config(const Config& config, int workers = 0);

// results.json, results.csv and plotdata/*.csv under `dir`.
void write_results(const std::vector<ResultRecord>& records, const std::filesystem::path& dir);

nlohmann::json results_to_json(const std::vector<ResultRecord>& records);
// Checks a results.json document against the result contract; throws ConfigError.
void validate_results(const nlohmann::json& doc);

std::string results_csv(const std::vector<ResultRecord>& records);

// Shortest round-trip decimal form, "inf"/"-inf"/"nan" for non-finite values.
std::string format_real(Real x);

}  // namespace fracstein
