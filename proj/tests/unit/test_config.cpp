#include "fracstein/config.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>

using namespace fracstein;
using nlohmann::json;

namespace {

json minimal() {
  return json::parse(R"({"experiments": [{
      "name": "x",
      "energy": {"kind": "Wfrac", "alpha": 0.25, "p": 2, "regime": "piecewise_constant"},
      "grid": {"T": 1, "m": 16},
      "reps": 100,
      "seed": 2}]})");
}

std::string error_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

TEST_CASE("parse a minimal experiment") {
  const Config c = parse_config(minimal());
  REQUIRE(c.experiments.size() == 1);
  const ExperimentEntry& e = c.experiments[0];
  CHECK(e.name == "x");
  CHECK(e.type == ExperimentType::Risk);
  CHECK(e.spec.model == Model::Gaussian);
  CHECK(e.spec.energy.kind == EnergyKind::Wfrac);
  CHECK(e.spec.energy.regime == Regime::PiecewiseConstant);
  CHECK(e.spec.grid.cells() == 16);
  CHECK(e.spec.reps == 100);
  CHECK(e.spec.seed == 2);
}

TEST_CASE("errors carry the JSON path") {
  json doc = minimal();
  doc["experiments"][0]["energy"]["alfa"] = 0.3;
  CHECK(starts_with(error_of(doc), "$.experiments[0].energy.alfa"));

  doc = minimal();
  doc["experiments"][0]["grid"]["m"] = 0;
  CHECK(starts_with(error_of(doc), "$.experiments[0].grid.m"));

  doc = minimal();
  doc["experiments"][0]["reps"] = 10;
  CHECK(starts_with(error_of(doc), "$.experiments[0]"));

  doc = minimal();
  doc["experiments"][0]["model"] = "levy";
  CHECK(starts_with(error_of(doc), "$.experiments[0].model"));

  doc = minimal();
  doc["experiments"][0]["name"] = "bad name";
  CHECK(starts_with(error_of(doc), "$.experiments[0].name"));

  doc = minimal();
  doc["experiments"].push_back(doc["experiments"][0]);
  CHECK(starts_with(error_of(doc), "$.experiments[1].name"));

  doc = minimal();
  doc["experiments"][0]["energy"]["mu"] = json::object({{"atoms", json::array({json::array({2.0, 1.0})})}});
  doc["experiments"][0]["energy"]["kind"] = "L2";
  CHECK(starts_with(error_of(doc), "$.experiments[0]"));

  CHECK(starts_with(error_of(json::parse(R"({"runs": []})")), "$"));
  CHECK(!error_of(json::parse(R"({"experiments": "none"})")).empty());
}

TEST_CASE("stein and drift parsing") {
  const json doc = json::parse(R"({"experiments": [{
      "name": "s", "type": "super_efficiency",
      "stein": {"n": 8, "a": -1, "alpha": 0.25},
      "drifts": [{"kind": "zero"}, {"kind": "linear", "slope": 0.5},
                 {"kind": "affine_rate", "c0": 1, "c1": 2}, {"kind": "sine", "amplitude": 1, "frequency": 2}],
      "grid": {"T": 1, "m": 64}, "reps": 100}]})");
  const Config c = parse_config(doc);
  const ExperimentEntry& e = c.experiments[0];
  CHECK(e.type == ExperimentType::SuperEfficiency);
  REQUIRE(e.drifts.size() == 4);
  CHECK(e.drifts[1].value(1.0) == doctest::Approx(0.5));
  CHECK(e.drifts[2].value(1.0) == doctest::Approx(2.0));
  CHECK(e.drifts[3].value(0.5) == doctest::Approx(std::sin(1.0)));
  REQUIRE(e.spec.stein.has_value());
  CHECK(e.spec.stein->n() == 8);

  json bad = doc;
  bad["experiments"][0]["stein"]["n"] = 2;
  CHECK(error_of(bad).find("n >= 3") != std::string::npos);
  bad = doc;
  bad["experiments"][0]["grid"]["m"] = 60;
  CHECK(!error_of(bad).empty());
}

TEST_CASE("results serialize and validate") {
  json doc = json::parse(R"({"experiments": [
      {"name": "r", "energy": {"kind": "L2"}, "grid": {"T": 1, "m": 16}, "reps": 200, "seed": 1},
      {"name": "b", "type": "bound", "energy": {"kind": "Wfrac", "alpha": 0.6, "p": 2}, "grid": {"T": 1, "m": 16}},
      {"name": "d", "type": "divergence", "energy": {"kind": "H1"}, "resolutions": [4, 8, 16], "reps": 100}]})");
  const auto records = run_config(parse_config(doc), 1);
  REQUIRE(records.size() == 5);
  const json out = results_to_json(records);
  CHECK_NOTHROW(validate_results(out));
  CHECK(out["results"][1]["bound"] == "inf");
  CHECK(out["results"][2]["experiment"] == "d/m=4");

  json broken = out;
  broken["results"][0].erase("estimate");
  CHECK_THROWS_AS(validate_results(broken), ConfigError);

  const std::string csv = results_csv(records);
  CHECK(starts_with(csv, "experiment,model,estimator,energy,alpha,p,m,reps,seed,estimate,stderr,ci_lo,ci_hi,bound,ratio\n"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);

  // Same inputs, same bytes.
  CHECK(results_csv(run_config(parse_config(doc), 3)) == csv);
}

TEST_CASE("real formatting") {
  CHECK(format_real(0.5) == "0.5");
  CHECK(format_real(1.0 / 3.0) == "0.3333333333333333");
  CHECK(format_real(0.6) == "0.6");
  CHECK(std::stod(format_real(0.1 + 0.2)) == 0.1 + 0.2);
  CHECK(format_real(INFINITY) == "inf");
  CHECK(format_real(-INFINITY) == "-inf");
  CHECK(format_real(NAN) == "nan");
}
