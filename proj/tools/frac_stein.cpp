// frac-stein: experiment runner and bound calculator.
//
//   frac-stein run <config.json> <outdir>
//   frac-stein bounds --model gaussian --alpha 0.25 --p 2 --T 1
//   frac-stein divergence --energy h1 --m 64 --doublings 3 --reps 1000
//   frac-stein stein --n 8 --a -1 --alpha 0.25 --m 256 --reps 100000
//
// Exit codes: 0 success, 2 validation error, 3 numeric error, 1 other.

#include "fracstein/config.hpp"
#include "fracstein/cramer_rao.hpp"
#include "fracstein/montecarlo.hpp"
#include "fracstein/stein.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace fracstein;

namespace {

constexpr int kValidationError = 2;
constexpr int kNumericError = 3;

std::string fixed6(Real x) {
  if (!std::isfinite(x)) return format_real(x);
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << x;
  return os.str();
}

// "lebesgue" or "atoms:t1:w1,t2:w2".
MeasureSpec parse_mu(const std::string& text) {
  if (text == "lebesgue") return MeasureSpec::lebesgue();
  const std::string prefix = "atoms:";
  if (text.rfind(prefix, 0) != 0) throw std::invalid_argument("--mu must be 'lebesgue' or 'atoms:t:w[,t:w...]'");
  std::vector<Atom> atoms;
  std::stringstream list(text.substr(prefix.size()));
  std::string item;
  while (std::getline(list, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("--mu atom must be t:w");
    atoms.push_back({std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
  }
  if (atoms.empty()) throw std::invalid_argument("--mu needs at least one atom");
  return MeasureSpec::discrete(std::move(atoms));
}

int cmd_run(const std::string& config_path, const std::string& outdir) {
  const Config config = load_config(config_path);
  const auto records = run_config(config);
  write_results(records, outdir);
  std::cout << results_csv(records);
  return 0;
}

struct BoundsArgs {
  std::string model = "gaussian";
  std::optional<Real> alpha;
  Real p = 2.0;
  Real horizon = 1.0;
  std::string mu = "lebesgue";
  Real mean_intensity = 1.0;
};

int cmd_bounds(const BoundsArgs& args) {
  if (args.model != "gaussian" && args.model != "cox") throw std::invalid_argument("--model must be gaussian or cox");
  const MeasureSpec mu = parse_mu(args.mu);
  const IntensitySpec intensity = IntensitySpec::deterministic(args.mean_intensity);
  std::cout << "model,risk,alpha,p,T,bound\n";
  const auto row = [&](const std::string& risk, const std::string& alpha, const std::string& p, Real value) {
    std::cout << args.model << ',' << risk << ',' << alpha << ',' << p << ',' << args.horizon << ',' << fixed6(value)
              << '\n';
  };
  if (!args.alpha) {
    const Real l2 = args.model == "gaussian" ? cr_l2_gaussian(mu, args.horizon)
                                             : cr_l2_cox(intensity, mu, args.horizon);
    row("L2(" + mu.describe() + ")", "", "", l2);
    return 0;
  }
  std::ostringstream a, p;
  a << *args.alpha;
  p << args.p;
  if (args.model == "gaussian") {
    row("Walpha_p", a.str(), p.str(),
        args.p == 2.0 ? cr_w2alpha_gaussian(args.horizon, *args.alpha)
                      : cr_walphap_gaussian(args.horizon, *args.alpha, args.p));
    if (args.p != 2.0) row("risk_of_X", a.str(), p.str(), risk_of_X_walphap(args.horizon, *args.alpha, args.p));
  } else {
    if (args.p != 2.0) throw std::invalid_argument("cox bounds are available for p = 2 only");
    row("Walpha_p", a.str(), p.str(), cr_w2alpha_cox(intensity, args.horizon, *args.alpha));
  }
  return 0;
}

struct DivergenceArgs {
  std::string model = "gaussian";
  std::string energy = "h1";
  Real alpha = 0.6;
  Real p = 2.0;
  std::string regime = "piecewise_linear";
  Index m = 64;
  int doublings = 3;
  Index reps = 1000;
  std::uint64_t seed = 1;
  Real horizon = 1.0;
};

int cmd_divergence(const DivergenceArgs& args) {
  EnergySpec energy;
  if (args.energy == "h1") {
    energy = EnergySpec::h1();
  } else if (args.energy == "wfrac") {
    if (args.regime != "piecewise_linear" && args.regime != "piecewise_constant") {
      throw std::invalid_argument("--regime must be piecewise_linear or piecewise_constant");
    }
    energy = EnergySpec::wfrac(args.alpha, args.p,
                               args.regime == "piecewise_linear" ? Regime::PiecewiseLinear : Regime::PiecewiseConstant);
  } else {
    throw std::invalid_argument("--energy must be h1 or wfrac");
  }
  if (args.model != "gaussian" && args.model != "cox") throw std::invalid_argument("--model must be gaussian or cox");
  std::vector<Index> resolutions;
  for (int i = 0; i < args.doublings; ++i) resolutions.push_back(args.m << i);
  const auto rows = divergence_probe(args.model == "gaussian" ? Model::Gaussian : Model::Cox, energy, resolutions,
                                     args.reps, args.seed, args.horizon);
  std::cout << "m,mean,stderr,growth_ratio\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::cout << rows[i].m << ',' << format_real(rows[i].mean) << ',' << format_real(rows[i].std_error) << ','
              << (i ? format_real(rows[i].mean / rows[i - 1].mean) : "") << '\n';
  }
  return 0;
}

struct SteinArgs {
  Index n = 8;
  Real a = -1.0;
  Real alpha = 0.25;
  Real horizon = 1.0;
  Index m = 256;
  Index reps = 100000;
  std::uint64_t seed = 1;
  std::vector<Real> slopes{0.0};
};

int cmd_stein(const SteinArgs& args) {
  if (args.n < 3) throw std::invalid_argument("stein: n >= 3 required");
  const SteinConfig config = SteinConfig::uniform(args.horizon, args.n, args.a, args.alpha);
  std::vector<DriftSpec> drifts;
  for (Real s : args.slopes) drifts.push_back(s == 0.0 ? DriftSpec::zero() : DriftSpec::linear(s));
  const auto rows = super_efficiency_experiment(config, drifts, args.m, args.reps, args.seed);
  std::cout << "drift,estimate,stderr,predicted,predicted_stderr,bound,below_bound,matches_prediction\n";
  for (const auto& row : rows) {
    std::cout << row.drift << ',' << format_real(row.risk.estimate) << ',' << format_real(row.risk.std_error) << ','
              << format_real(row.predicted.risk) << ',' << format_real(row.predicted.risk_stderr) << ','
              << format_real(row.risk.bound) << ',' << (row.below_bound ? "true" : "false") << ','
              << (row.matches_prediction ? "true" : "false") << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drift and intensity estimation under fractional Sobolev risks"};
  app.require_subcommand(1);

  std::string config_path, outdir;
  auto* run = app.add_subcommand("run", "Run every experiment of a JSON configuration");
  run->add_option("config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);
  run->add_option("outdir", outdir, "Output directory")->required();

  BoundsArgs bounds;
  auto* bnd = app.add_subcommand("bounds", "Print Cramer-Rao bounds as CSV");
  bnd->add_option("--model", bounds.model, "gaussian or cox");
  bnd->add_option("--alpha", bounds.alpha, "Fractional order; omit for the L2(mu) bound");
  bnd->add_option("--p", bounds.p, "Integrability exponent");
  bnd->add_option("--T", bounds.horizon, "Horizon");
  bnd->add_option("--mu", bounds.mu, "lebesgue or atoms:t:w[,t:w...]");
  bnd->add_option("--mean-intensity", bounds.mean_intensity, "Constant mean Cox intensity");

  DivergenceArgs div;
  auto* dv = app.add_subcommand("divergence", "Mean discrete energy of X - u under grid refinement");
  dv->add_option("--model", div.model, "gaussian or cox");
  dv->add_option("--energy", div.energy, "h1 or wfrac");
  dv->add_option("--alpha", div.alpha, "Fractional order for wfrac");
  dv->add_option("--p", div.p, "Exponent for wfrac");
  dv->add_option("--regime", div.regime, "piecewise_linear or piecewise_constant");
  dv->add_option("--m", div.m, "Coarsest cell count");
  dv->add_option("--doublings", div.doublings, "Number of resolutions (>= 3)");
  dv->add_option("--reps", div.reps, "Replications per resolution");
  dv->add_option("--seed", div.seed, "Master seed");
  dv->add_option("--T", div.horizon, "Horizon");

  SteinArgs st;
  auto* sc = app.add_subcommand("stein", "Super-efficiency experiment for the shrinkage estimator");
  sc->add_option("--n", st.n, "Coarse cells");
  sc->add_option("--a", st.a, "Exponent a in (1 - n/2, 0)");
  sc->add_option("--alpha", st.alpha, "Fractional order in (0, 1/2)");
  sc->add_option("--T", st.horizon, "Horizon");
  sc->add_option("--m", st.m, "Simulation cells (multiple of n)");
  sc->add_option("--reps", st.reps, "Replications");
  sc->add_option("--seed", st.seed, "Master seed");
  sc->add_option("--drift-slope", st.slopes, "Drift u(t) = slope * t; repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidationError;
  }

  try {
    if (*run) return cmd_run(config_path, outdir);
    if (*bnd) return cmd_bounds(bounds);
    if (*dv) return cmd_divergence(div);
    if (*sc) return cmd_stein(st);
  } catch (const ConfigError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidationError;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
