#include "fracstein/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <regex>
#include <set>
#include <sstream>

namespace fracstein {

using nlohmann::json;

namespace {

std::string type_name(ExperimentType type) {
  switch (type) {
    case ExperimentType::Risk:
      return "risk";
    case ExperimentType::Divergence:
      return "divergence";
    case ExperimentType::SuperEfficiency:
      return "super_efficiency";
    case ExperimentType::Bound:
      return "bound";
  }
  return "?";
}

// Typed access to one JSON object with path-qualified errors and a check
// that every present key is known.
class ObjectReader {
 public:
  ObjectReader(const json& node, std::string path, std::set<std::string> allowed)
      : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_, "expected an object");
    for (const auto& item : node_.items()) {
      if (!allowed.count(item.key())) fail(child(item.key()), "unknown key");
    }
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
  }

  std::string child(const std::string& key) const { return path_ + "." + key; }
  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return node_.contains(key); }
  const json& raw(const std::string& key) const {
    if (!has(key)) fail(child(key), "missing required key");
    return node_.at(key);
  }

  Real real(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number()) fail(child(key), "expected a number");
    return v.get<Real>();
  }
  Real real(const std::string& key, Real fallback) const { return has(key) ? real(key) : fallback; }

  std::int64_t integer(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number_integer()) fail(child(key), "expected an integer");
    return v.get<std::int64_t>();
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_unsigned()) fail(child(key), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  std::string text(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_string()) fail(child(key), "expected a string");
    return v.get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) fail(child(key), "expected true or false");
    return v.get<bool>();
  }

 private:
  const json& node_;
  std::string path_;
};

// Runs `fn`, re-raising domain errors as ConfigError under `path`.
template <class Fn>
auto at_path(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

MeasureSpec parse_measure(const json& node, const std::string& path) {
  if (node.is_string()) {
    if (node.get<std::string>() != "lebesgue") ObjectReader::fail(path, "expected \"lebesgue\" or {\"atoms\": ...}");
    return MeasureSpec::lebesgue();
  }
  ObjectReader r(node, path, {"atoms"});
  const json& atoms = r.raw("atoms");
  if (!atoms.is_array() || atoms.empty()) ObjectReader::fail(r.child("atoms"), "expected a nonempty array");
  std::vector<Atom> out;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const std::string p = r.child("atoms") + "[" + std::to_string(i) + "]";
    const json& a = atoms[i];
    if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
      ObjectReader::fail(p, "expected [time, weight]");
    }
    out.push_back({a[0].get<Real>(), a[1].get<Real>()});
  }
  return MeasureSpec::discrete(std::move(out));
}

EnergySpec parse_energy(const json& node, const std::string& path) {
  ObjectReader r(node, path, {"kind", "alpha", "p", "regime", "mu", "subgrid_correction"});
  const std::string kind = r.text("kind");
  EnergySpec e;
  if (kind == "L2") {
    e = EnergySpec::l2(r.has("mu") ? parse_measure(r.raw("mu"), r.child("mu")) : MeasureSpec::lebesgue());
  } else if (kind == "H1") {
    e = EnergySpec::h1();
  } else if (kind == "Wfrac") {
    const std::string regime = r.text("regime", "piecewise_linear");
    Regime g;
    if (regime == "piecewise_linear") {
      g = Regime::PiecewiseLinear;
    } else if (regime == "piecewise_constant") {
      g = Regime::PiecewiseConstant;
    } else {
      ObjectReader::fail(r.child("regime"), "expected \"piecewise_linear\" or \"piecewise_constant\"");
    }
    e = EnergySpec::wfrac(r.real("alpha"), r.real("p", 2.0), g);
  } else {
    ObjectReader::fail(r.child("kind"), "expected \"L2\", \"H1\" or \"Wfrac\"");
  }
  if (kind != "L2" && r.has("mu")) ObjectReader::fail(r.child("mu"), "only valid for kind \"L2\"");
  if (kind != "Wfrac") {
    for (const char* key : {"alpha", "p", "regime"}) {
      if (r.has(key)) ObjectReader::fail(r.child(key), "only valid for kind \"Wfrac\"");
    }
  }
  e.subgrid_correction = r.boolean("subgrid_correction", false);
  at_path(path, [&] {
    e.validate();
    return 0;
  });
  return e;
}

DriftSpec parse_drift(const json& node, const std::string& path) {
  const std::string kind = [&] {
    if (!node.is_object() || !node.contains("kind") || !node.at("kind").is_string()) {
      ObjectReader::fail(path + ".kind", "missing drift kind");
    }
    return node.at("kind").get<std::string>();
  }();
  if (kind == "zero") {
    ObjectReader r(node, path, {"kind"});
    return DriftSpec::zero();
  }
  if (kind == "linear") {
    ObjectReader r(node, path, {"kind", "slope"});
    return DriftSpec::linear(r.real("slope"));
  }
  if (kind == "affine_rate") {
    ObjectReader r(node, path, {"kind", "c0", "c1"});
    return DriftSpec::affine_rate(r.real("c0"), r.real("c1", 0.0));
  }
  if (kind == "sine") {
    ObjectReader r(node, path, {"kind", "amplitude", "frequency"});
    return DriftSpec::sine(r.real("amplitude"), r.real("frequency"));
  }
  ObjectReader::fail(path + ".kind", "expected \"zero\", \"linear\", \"affine_rate\" or \"sine\"");
}

IntensitySpec parse_intensity(const json& node, const std::string& path) {
  ObjectReader r(node, path, {"kind", "c0", "c1", "max", "shape", "scale"});
  const std::string kind = r.text("kind", "deterministic");
  const Real c0 = r.real("c0", 1.0);
  const Real c1 = r.real("c1", 0.0);
  std::optional<Real> max;
  if (r.has("max")) max = r.real("max");
  return at_path(path, [&] {
    if (kind == "deterministic") {
      if (r.has("shape") || r.has("scale")) {
        throw std::invalid_argument("shape/scale only valid for kind \"random_scaled\"");
      }
      return IntensitySpec::deterministic(c0, c1, max);
    }
    if (kind == "random_scaled") {
      const GammaLaw law{r.real("shape"), r.real("scale")};
      if (!(law.shape > 0.0) || !(law.scale > 0.0)) throw std::invalid_argument("gamma shape and scale must be > 0");
      return IntensitySpec::random_scaled(law, c0, c1, max);
    }
    throw std::invalid_argument("kind must be \"deterministic\" or \"random_scaled\"");
  });
}

SteinConfig parse_stein(const json& node, const std::string& path, Real horizon) {
  ObjectReader r(node, path, {"n", "a", "alpha", "quadrature_tol"});
  const auto n = r.integer("n");
  return at_path(path, [&] {
    if (n < 3) throw std::invalid_argument("n >= 3 required");
    SteinConfig c = SteinConfig::uniform(horizon, n, r.real("a"), r.real("alpha"));
    c.quadrature_tol = r.real("quadrature_tol", c.quadrature_tol);
    c.validate();
    return c;
  });
}

ExperimentEntry parse_experiment(const json& node, const std::string& path) {
  ObjectReader r(node, path,
                 {"name", "type", "model", "estimator", "energy", "grid", "drift", "intensity", "stein", "reps",
                  "seed", "resolutions", "drifts"});
  ExperimentEntry entry;
  entry.name = r.text("name");
  if (!std::regex_match(entry.name, std::regex("[A-Za-z0-9_.-]+"))) {
    ObjectReader::fail(r.child("name"), "must match [A-Za-z0-9_.-]+");
  }
  const std::string type = r.text("type", "risk");
  if (type == "risk") {
    entry.type = ExperimentType::Risk;
  } else if (type == "divergence") {
    entry.type = ExperimentType::Divergence;
  } else if (type == "super_efficiency") {
    entry.type = ExperimentType::SuperEfficiency;
  } else if (type == "bound") {
    entry.type = ExperimentType::Bound;
  } else {
    ObjectReader::fail(r.child("type"), "expected \"risk\", \"divergence\", \"super_efficiency\" or \"bound\"");
  }

  ExperimentSpec& spec = entry.spec;
  const std::string model = r.text("model", "gaussian");
  if (model == "gaussian") {
    spec.model = Model::Gaussian;
  } else if (model == "cox") {
    spec.model = Model::Cox;
  } else {
    ObjectReader::fail(r.child("model"), "expected \"gaussian\" or \"cox\"");
  }
  const std::string estimator = r.text("estimator", entry.type == ExperimentType::SuperEfficiency ? "stein" : "X");
  if (estimator == "X") {
    spec.estimator = EstimatorKind::Identity;
  } else if (estimator == "stein") {
    spec.estimator = EstimatorKind::Stein;
  } else {
    ObjectReader::fail(r.child("estimator"), "expected \"X\" or \"stein\"");
  }

  Real horizon = 1.0;
  Index m = 64;
  if (r.has("grid")) {
    ObjectReader g(r.raw("grid"), r.child("grid"), {"T", "m"});
    horizon = g.real("T", 1.0);
    m = g.integer("m", m);
    if (m < 1) ObjectReader::fail(g.child("m"), "must be >= 1");
    if (!(horizon > 0.0)) ObjectReader::fail(g.child("T"), "must be > 0");
  }
  spec.grid = at_path(r.child("grid"), [&] { return make_uniform_grid(horizon, m); });

  if (r.has("drift")) {
    if (spec.model != Model::Gaussian) ObjectReader::fail(r.child("drift"), "only valid for model \"gaussian\"");
    spec.drift = parse_drift(r.raw("drift"), r.child("drift"));
  }
  if (r.has("intensity")) {
    if (spec.model != Model::Cox) ObjectReader::fail(r.child("intensity"), "only valid for model \"cox\"");
    spec.intensity = parse_intensity(r.raw("intensity"), r.child("intensity"));
  }
  if (r.has("stein")) spec.stein = parse_stein(r.raw("stein"), r.child("stein"), horizon);

  spec.reps = r.integer("reps", 1000);
  spec.seed = r.unsigned_integer("seed", 1);

  if (entry.type == ExperimentType::SuperEfficiency) {
    if (!spec.stein) ObjectReader::fail(r.child("stein"), "missing required key");
    if (spec.model != Model::Gaussian) ObjectReader::fail(r.child("model"), "super_efficiency requires \"gaussian\"");
    if (r.has("energy")) ObjectReader::fail(r.child("energy"), "implied by stein for super_efficiency");
    spec.estimator = EstimatorKind::Stein;
    spec.energy = EnergySpec::wfrac(spec.stein->alpha, 2.0, Regime::PiecewiseLinear);
    spec.energy.subgrid_correction = true;
    if (r.has("drifts")) {
      const json& list = r.raw("drifts");
      if (!list.is_array() || list.empty()) ObjectReader::fail(r.child("drifts"), "expected a nonempty array");
      for (std::size_t i = 0; i < list.size(); ++i) {
        entry.drifts.push_back(parse_drift(list[i], r.child("drifts") + "[" + std::to_string(i) + "]"));
      }
    } else {
      entry.drifts.push_back(spec.drift);
    }
  } else {
    if (r.has("drifts")) ObjectReader::fail(r.child("drifts"), "only valid for type \"super_efficiency\"");
    spec.energy = parse_energy(r.raw("energy"), r.child("energy"));
  }

  if (entry.type == ExperimentType::Divergence) {
    const json& list = r.raw("resolutions");
    if (!list.is_array()) ObjectReader::fail(r.child("resolutions"), "expected an array of integers");
    for (const json& v : list) {
      if (!v.is_number_integer()) ObjectReader::fail(r.child("resolutions"), "expected an array of integers");
      entry.resolutions.push_back(v.get<Index>());
    }
    at_path(r.child("resolutions"), [&] {
      if (entry.resolutions.size() < 3) throw std::invalid_argument("at least 3 resolutions required");
      for (std::size_t i = 1; i < entry.resolutions.size(); ++i) {
        if (entry.resolutions[i] != 2 * entry.resolutions[i - 1]) {
          throw std::invalid_argument("each resolution must double the previous one");
        }
      }
      if (entry.resolutions.front() < 2) throw std::invalid_argument("resolutions must be >= 2");
      return 0;
    });
  } else if (r.has("resolutions")) {
    ObjectReader::fail(r.child("resolutions"), "only valid for type \"divergence\"");
  }

  if (entry.type == ExperimentType::Bound) {
    if (spec.estimator == EstimatorKind::Stein) ObjectReader::fail(r.child("estimator"), "bound experiments use X");
    if (spec.model == Model::Cox && spec.energy.kind == EnergyKind::Wfrac && spec.energy.p != 2.0) {
      ObjectReader::fail(r.child("energy"), "cox model supports L2, H1 and W^{alpha,2} energies (p = 2)");
    }
  } else {
    at_path(path, [&] {
      spec.validate();
      return 0;
    });
  }
  return entry;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

json real_json(Real x) {
  if (std::isfinite(x)) return x;
  return format_real(x);
}

// RFC 4180 quoting for fields that may contain commas (drift descriptions).
std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string energy_label(const EnergySpec& e) {
  switch (e.kind) {
    case EnergyKind::L2:
      return "L2(" + e.mu.describe() + ")";
    case EnergyKind::H1:
      return "H1";
    case EnergyKind::Wfrac:
      return e.regime == Regime::PiecewiseConstant ? "Wfrac_pc" : "Wfrac_pl";
  }
  return "?";
}

ResultRecord base_record(const ExperimentEntry& entry, const ExperimentSpec& spec) {
  ResultRecord rec;
  rec.experiment = entry.name;
  rec.type = entry.type;
  rec.model = to_string(spec.model);
  rec.estimator = to_string(spec.estimator);
  rec.energy = energy_label(spec.energy);
  if (spec.energy.kind == EnergyKind::Wfrac) {
    rec.alpha = spec.energy.alpha;
    rec.p = spec.energy.p;
  }
  rec.m = spec.grid.cells();
  return rec;
}

}  // namespace

std::string format_real(Real x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

Config parse_config(const json& doc) {
  ObjectReader root(doc, "$", {"experiments"});
  const json& list = root.raw("experiments");
  if (!list.is_array() || list.empty()) ObjectReader::fail("$.experiments", "expected a nonempty array");
  Config config;
  std::set<std::string> names;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = "$.experiments[" + std::to_string(i) + "]";
    config.experiments.push_back(parse_experiment(list[i], path));
    if (!names.insert(config.experiments.back().name).second) {
      ObjectReader::fail(path + ".name", "duplicate experiment name");
    }
  }
  return config;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

std::vector<ResultRecord> run_config(const Config& config, int workers) {
  std::vector<ResultRecord> records;
  for (const ExperimentEntry& entry : config.experiments) {
    ExperimentSpec spec = entry.spec;
    spec.workers = workers;
    switch (entry.type) {
      case ExperimentType::Bound: {
        ResultRecord rec = base_record(entry, spec);
        rec.bound = experiment_bound(spec);
        records.push_back(std::move(rec));
        break;
      }
      case ExperimentType::Risk: {
        ResultRecord rec = base_record(entry, spec);
        rec.report = estimate_risk(spec);
        rec.bound = rec.report->bound;
        records.push_back(std::move(rec));
        break;
      }
      case ExperimentType::Divergence: {
        const auto rows = divergence_probe(spec.model, spec.energy, entry.resolutions, spec.reps, spec.seed,
                                           spec.grid.horizon(), workers);
        for (std::size_t i = 0; i < rows.size(); ++i) {
          ExperimentSpec at_m = spec;
          at_m.grid = make_uniform_grid(spec.grid.horizon(), rows[i].m);
          ResultRecord rec = base_record(entry, at_m);
          rec.experiment = entry.name + "/m=" + std::to_string(rows[i].m);
          RiskReport report;
          report.estimate = rows[i].mean;
          report.std_error = rows[i].std_error;
          report.ci_lo = rows[i].mean - 1.96 * rows[i].std_error;
          report.ci_hi = rows[i].mean + 1.96 * rows[i].std_error;
          report.bound = experiment_bound(at_m);
          if (std::isfinite(report.bound) && report.bound > 0.0) report.ratio = report.estimate / report.bound;
          report.reps = spec.reps;
          report.seed = spec.seed;
          report.m = rows[i].m;
          rec.bound = report.bound;
          rec.report = report;
          if (i > 0) rec.extra["growth_ratio"] = rows[i].mean / rows[i - 1].mean;
          records.push_back(std::move(rec));
        }
        break;
      }
      case ExperimentType::SuperEfficiency: {
        const auto rows = super_efficiency_experiment(*spec.stein, entry.drifts, spec.grid.cells(), spec.reps,
                                                      spec.seed, workers);
        for (const SuperEfficiencyRow& row : rows) {
          ResultRecord rec = base_record(entry, spec);
          rec.experiment = entry.name + "/" + row.drift;
          rec.report = row.risk;
          rec.bound = row.risk.bound;
          rec.extra["drift"] = row.drift;
          rec.extra["stein"] = {{"n", spec.stein->n()}, {"a", spec.stein->a}, {"alpha", spec.stein->alpha}};
          rec.extra["predicted"] = {{"risk", row.predicted.risk},
                                    {"stderr", row.predicted.risk_stderr},
                                    {"mean_inv_q", row.predicted.mean_inv_q},
                                    {"mean_inv_q_stderr", row.predicted.inv_q_stderr}};
          rec.extra["below_bound"] = row.below_bound;
          rec.extra["matches_prediction"] = row.matches_prediction;
          records.push_back(std::move(rec));
        }
        break;
      }
    }
  }
  return records;
}

json results_to_json(const std::vector<ResultRecord>& records) {
  json list = json::array();
  for (const ResultRecord& rec : records) {
    json item;
    item["experiment"] = rec.experiment;
    item["type"] = type_name(rec.type);
    item["model"] = rec.model;
    item["estimator"] = rec.estimator;
    item["energy"] = rec.energy;
    item["alpha"] = rec.alpha ? json(*rec.alpha) : json(nullptr);
    item["p"] = rec.p ? json(*rec.p) : json(nullptr);
    item["m"] = rec.m;
    item["bound"] = real_json(rec.bound);
    if (rec.report) {
      const RiskReport& r = *rec.report;
      item["reps"] = r.reps;
      item["seed"] = r.seed;
      item["estimate"] = real_json(r.estimate);
      item["stderr"] = real_json(r.std_error);
      item["ci"] = {real_json(r.ci_lo), real_json(r.ci_hi)};
      item["ratio"] = r.ratio ? real_json(*r.ratio) : json(nullptr);
      json trace = json::array();
      for (const TracePoint& t : r.trace) {
        trace.push_back({{"reps", t.reps}, {"estimate", real_json(t.estimate)}, {"stderr", real_json(t.std_error)}});
      }
      item["trace"] = trace;
    }
    for (const auto& extra : rec.extra.items()) item[extra.key()] = extra.value();
    list.push_back(std::move(item));
  }
  return json{{"results", list}};
}

void validate_results(const json& doc) {
  ObjectReader root(doc, "$", {"results"});
  const json& list = root.raw("results");
  if (!list.is_array()) ObjectReader::fail("$.results", "expected an array");
  const auto is_real = [](const json& v) { return v.is_number() || (v.is_string() && (v == "inf" || v == "-inf")); };
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = "$.results[" + std::to_string(i) + "]";
    ObjectReader r(list[i], path,
                   {"experiment", "type", "model", "estimator", "energy", "alpha", "p", "m", "bound", "reps", "seed",
                    "estimate", "stderr", "ci", "ratio", "trace", "growth_ratio", "drift", "stein", "predicted",
                    "below_bound", "matches_prediction"});
    for (const char* key : {"experiment", "type", "model", "estimator", "energy"}) r.text(key);
    r.integer("m");
    if (!is_real(r.raw("bound"))) ObjectReader::fail(r.child("bound"), "expected a number or \"inf\"");
    const std::string type = r.text("type");
    if (type == "bound") continue;
    r.integer("reps");
    r.unsigned_integer("seed", 0);
    for (const char* key : {"estimate", "stderr"}) {
      if (!is_real(r.raw(key))) ObjectReader::fail(r.child(key), "expected a number");
    }
    const json& ci = r.raw("ci");
    if (!ci.is_array() || ci.size() != 2 || !is_real(ci[0]) || !is_real(ci[1])) {
      ObjectReader::fail(r.child("ci"), "expected [lo, hi]");
    }
    const Real est = r.real("estimate");
    if (!(ci[0].get<Real>() <= est && est <= ci[1].get<Real>())) {
      ObjectReader::fail(r.child("ci"), "lo <= estimate <= hi violated");
    }
    if (r.real("stderr") < 0.0) ObjectReader::fail(r.child("stderr"), "must be >= 0");
  }
}

std::string results_csv(const std::vector<ResultRecord>& records) {
  std::ostringstream os;
  os << "experiment,model,estimator,energy,alpha,p,m,reps,seed,estimate,stderr,ci_lo,ci_hi,bound,ratio\n";
  const auto opt = [](const std::optional<Real>& v) { return v ? format_real(*v) : std::string(); };
  for (const ResultRecord& rec : records) {
    os << csv_field(rec.experiment) << ',' << rec.model << ',' << rec.estimator << ',' << csv_field(rec.energy)
       << ',' << opt(rec.alpha)
       << ',' << opt(rec.p) << ',' << rec.m << ',';
    if (rec.report) {
      const RiskReport& r = *rec.report;
      os << r.reps << ',' << r.seed << ',' << format_real(r.estimate) << ',' << format_real(r.std_error) << ','
         << format_real(r.ci_lo) << ',' << format_real(r.ci_hi) << ',';
    } else {
      os << ",,,,,,";
    }
    os << format_real(rec.bound) << ',' << (rec.report ? opt(rec.report->ratio) : std::string()) << '\n';
  }
  return os.str();
}

void write_results(const std::vector<ResultRecord>& records, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "plotdata");
  write_file(dir / "results.json", results_to_json(records).dump(2) + "\n");
  write_file(dir / "results.csv", results_csv(records));

  // Group rows of multi-row experiments into one series file each.
  std::map<std::string, std::ostringstream> series;
  for (const ResultRecord& rec : records) {
    const std::string base = rec.experiment.substr(0, rec.experiment.find('/'));
    switch (rec.type) {
      case ExperimentType::Risk: {
        std::ostringstream os;
        os << "reps,estimate,stderr,ci_lo,ci_hi,bound\n";
        for (const TracePoint& t : rec.report->trace) {
          os << t.reps << ',' << format_real(t.estimate) << ',' << format_real(t.std_error) << ','
             << format_real(t.estimate - 1.96 * t.std_error) << ',' << format_real(t.estimate + 1.96 * t.std_error)
             << ',' << format_real(rec.bound) << '\n';
        }
        write_file(dir / "plotdata" / (base + "_convergence.csv"), os.str());
        break;
      }
      case ExperimentType::Divergence: {
        auto& os = series[base + "_divergence.csv"];
        if (os.tellp() == 0) os << "m,mean,stderr\n";
        os << rec.m << ',' << format_real(rec.report->estimate) << ',' << format_real(rec.report->std_error) << '\n';
        break;
      }
      case ExperimentType::SuperEfficiency: {
        auto& os = series[base + "_super_efficiency.csv"];
        if (os.tellp() == 0) os << "drift,estimate,stderr,predicted,predicted_stderr,bound\n";
        os << csv_field(rec.extra["drift"].get<std::string>()) << ',' << format_real(rec.report->estimate) << ','
           << format_real(rec.report->std_error) << ',' << format_real(rec.extra["predicted"]["risk"].get<Real>())
           << ',' << format_real(rec.extra["predicted"]["stderr"].get<Real>()) << ',' << format_real(rec.bound)
           << '\n';
        break;
      }
      case ExperimentType::Bound: {
        auto& os = series["bounds.csv"];
        if (os.tellp() == 0) os << "experiment,model,energy,alpha,p,bound\n";
        os << csv_field(rec.experiment) << ',' << rec.model << ',' << csv_field(rec.energy) << ','
           << (rec.alpha ? format_real(*rec.alpha) : "") << ',' << (rec.p ? format_real(*rec.p) : "") << ','
           << format_real(rec.bound) << '\n';
        break;
      }
    }
  }
  for (const auto& [file, os] : series) write_file(dir / "plotdata" / file, os.str());
}

}  // namespace fracstein
