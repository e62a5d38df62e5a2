// Command-line front end: generate, compare, fit, measures.
//
// Exit codes: 0 success, 2 invalid input or configuration, 3 solver-failure abort.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qperturb/errors.hpp"
#include "qperturb/io.hpp"
#include "qperturb/measures.hpp"
#include "qperturb/pipeline.hpp"

namespace {

using namespace qperturb;

constexpr int kExitInvalid = 2;
constexpr int kExitSolverAbort = 3;

std::vector<double> parse_doubles(const std::string& text, std::size_t expected, const char* what) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw InvalidArgument(std::string(what) + ": '" + tok + "' is not a number");
    }
  }
  if (out.size() != expected) {
    throw InvalidArgument(std::string(what) + " expects " + std::to_string(expected) + " comma-separated numbers");
  }
  return out;
}

NormalTarget parse_dist(const std::string& text, const char* what) {
  const auto v = parse_doubles(text, 2, what);
  return {v[0], v[1]};
}

// Inline JSON when the text starts with '[', otherwise a path to a JSON file.
nlohmann::json json_arg(const std::string& text) {
  const auto first = text.find_first_not_of(" \t");
  const std::string body = first != std::string::npos && text[first] == '[' ? text : read_file(text);
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("matrix argument: ") + e.what());
  }
}

std::filesystem::path default_out_dir() {
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "qperturb_out";
}

// Raw flag values. Applied on top of --config so flags win.
struct RunFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::optional<double> sigma;
  std::string sigma_matrix;
  std::string mu_matrix;
  std::string constraints;
  std::string baseline;
  std::string bell_c;
  std::string bell_label;
  std::string state_file;
  std::optional<double> f0;
  std::optional<double> f1;
  std::string energy_dist;
  std::string entropy_dist;
  std::string out;
  std::optional<std::size_t> bins;
  std::optional<unsigned> threads;
  std::optional<double> max_failure_rate;
  bool abort_on_failure = false;

  void attach(CLI::App* app, bool seed_required) {
    app->add_option("--config", config_path, "JSON run configuration; flags override its fields");
    auto* s = app->add_option("--seed", seed, "64-bit seed");
    if (seed_required) s->required();
    app->add_option("--samples", samples, "number of retained samples");
    app->add_option("--sigma", sigma, "standard deviation applied to all 16 coefficients");
    app->add_option("--sigma-matrix", sigma_matrix, "4x4 standard deviations, inline JSON or a JSON file");
    app->add_option("--mu-matrix", mu_matrix, "4x4 means, inline JSON or a JSON file");
    app->add_option("--constraints", constraints, "comma list of trace, energy, entropy");
    app->add_option("--baseline", baseline, "bell (Bell-diagonal), pure (pure Bell state) or file");
    app->add_option("--bell-c", bell_c, "Bell-diagonal coefficients c0,c1,c2,c3");
    app->add_option("--bell-label", bell_label, "phi+, phi-, psi+ or psi-");
    app->add_option("--state-file", state_file, "baseline density matrix file (json or csv, one state)");
    app->add_option("--f0", f0, "qubit A frequency in GHz");
    app->add_option("--f1", f1, "qubit B frequency in GHz");
    app->add_option("--energy-dist", energy_dist, "sampled energy targets mean,stddev");
    app->add_option("--entropy-dist", entropy_dist, "sampled entropy targets mean,stddev (nats)");
    app->add_option("--out", out, std::string("output directory (default $") + kOutDirEnv + " or qperturb_out)");
    app->add_option("--bins", bins, "histogram bins");
    app->add_option("--threads", threads, "worker threads, 0 = all cores");
    app->add_option("--max-failure-rate", max_failure_rate, "abort above this solver failure fraction");
    app->add_flag("--abort-on-failure", abort_on_failure, "abort on the first failed solve instead of redrawing");
  }

  RunConfig resolve(RunConfig defaults = {}) const {
    RunConfig c = config_path.empty() ? std::move(defaults) : RunConfig::from_json(json_arg(config_path));
    if (config_path.empty() || !out.empty()) c.out_dir = out.empty() ? default_out_dir() : std::filesystem::path(out);
    if (seed) c.seed = *seed;
    if (samples) c.samples = *samples;
    if (sigma) c.set_uniform_sigma(*sigma);
    if (!sigma_matrix.empty()) {
      const auto j = json_arg(sigma_matrix);
      c.sigma = RunConfig::from_json(nlohmann::json{{"sigma", j}}).sigma;
    }
    if (!mu_matrix.empty()) {
      const auto j = json_arg(mu_matrix);
      c.mu = RunConfig::from_json(nlohmann::json{{"mu", j}}).mu;
    }
    if (!constraints.empty()) c.constraints = parse_constraint_list(constraints);
    if (!baseline.empty()) {
      if (baseline == "bell") {
        c.baseline.kind = BaselineKind::BellDiagonal;
      } else if (baseline == "pure") {
        c.baseline.kind = BaselineKind::PureBell;
      } else if (baseline == "file") {
        c.baseline.kind = BaselineKind::StateFile;
      } else {
        throw InvalidArgument("--baseline must be bell, pure or file");
      }
    }
    if (!bell_c.empty()) {
      const auto v = parse_doubles(bell_c, 4, "--bell-c");
      c.baseline.coefficients = {v[0], v[1], v[2], v[3]};
    }
    if (!bell_label.empty()) c.baseline.label = parse_bell_label(bell_label);
    if (!state_file.empty()) {
      c.baseline.path = state_file;
      if (baseline.empty()) c.baseline.kind = BaselineKind::StateFile;
    }
    if (f0 || f1) {
      const std::array<double, 2> cur = c.hamiltonian.value_or(std::array<double, 2>{kDefaultF0, kDefaultF1});
      c.hamiltonian = std::array<double, 2>{f0.value_or(cur[0]), f1.value_or(cur[1])};
    }
    if (!energy_dist.empty()) c.energy_dist = parse_dist(energy_dist, "--energy-dist");
    if (!entropy_dist.empty()) c.entropy_dist = parse_dist(entropy_dist, "--entropy-dist");
    if (bins) c.bins = *bins;
    if (threads) c.threads = *threads;
    if (max_failure_rate) c.max_failure_rate = *max_failure_rate;
    if (abort_on_failure) c.policy = FailurePolicy::Abort;
    return c;
  }
};

nlohmann::ordered_json report_json(const MeasureReport& r) {
  nlohmann::ordered_json j;
  for (const auto& name : measure_names()) j[name] = measure_value(r, name);
  return j;
}

int run(int argc, char** argv) {
  CLI::App app{"Constrained random perturbations of two-qubit density operators"};
  app.require_subcommand(1);

  RunFlags gen_flags;
  std::string cases;
  auto* gen = app.add_subcommand("generate", "generate constrained ensembles and their tables");
  gen_flags.attach(gen, true);
  gen->add_option("--cases", cases, "'all' runs the four standard constraint cases into case1..case4");

  RunFlags cmp_flags;
  std::string cmp_experiment;
  auto* cmp = app.add_subcommand("compare", "simulate around phi+ and compare with an experimental ensemble");
  cmp_flags.attach(cmp, false);
  cmp->add_option("--experiment", cmp_experiment, "experimental ensemble (json or csv)")->required();

  std::string fit_experiment;
  std::optional<double> fit_f0, fit_f1;
  std::string fit_out;
  auto* fit = app.add_subcommand("fit", "fit energy, entropy and eta statistics to an experimental ensemble");
  fit->add_option("--experiment", fit_experiment, "experimental ensemble (json or csv)")->required();
  fit->add_option("--f0", fit_f0, "qubit A frequency in GHz");
  fit->add_option("--f1", fit_f1, "qubit B frequency in GHz");
  fit->add_option("--out", fit_out, "write the JSON here instead of stdout");

  std::string ms_state, ms_reference;
  std::optional<double> ms_f0, ms_f1;
  auto* ms = app.add_subcommand("measures", "report every measure of a single state");
  ms->add_option("--state-file", ms_state, "state file (json or csv, one state)")->required();
  ms->add_option("--reference", ms_reference, "reference state for fidelity and distances (default: the state itself)");
  ms->add_option("--f0", ms_f0, "qubit A frequency in GHz");
  ms->add_option("--f1", ms_f1, "qubit B frequency in GHz");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  if (*gen) {
    if (!cases.empty() && cases != "all") throw InvalidArgument("--cases only accepts 'all'");
    RunConfig defaults;
    defaults.set_uniform_sigma(0.05);
    const RunConfig cfg = gen_flags.resolve(defaults);
    const auto results = run_cases(cfg, cases == "all");
    for (const auto& r : results) {
      std::cout << r.name << ": " << r.ensemble.samples.size() << " samples, failure rate "
                << format_double(r.ensemble.failure_rate()) << '\n';
    }
    std::cout << "wrote " << cfg.out_dir.string() << '\n';
    return 0;
  }
  if (*cmp) {
    RunConfig defaults;
    defaults.baseline.kind = BaselineKind::PureBell;
    defaults.baseline.label = BellLabel::PhiPlus;
    defaults.constraints = {ConstraintKind::UnitTrace, ConstraintKind::Energy, ConstraintKind::Entropy};
    defaults.hamiltonian = std::array<double, 2>{kDefaultF0, kDefaultF1};
    const RunConfig cfg = cmp_flags.resolve(defaults);
    const ExperimentEnsemble ensemble = load_ensemble(cmp_experiment);
    const ComparisonResult res = compare_to_experiment(cfg, ensemble);
    for (const auto& o : res.overlap) {
      std::cout << o.measure << ": mean difference " << format_double(o.mean_difference) << ", stddev ratio "
                << format_double(o.stddev_ratio) << '\n';
    }
    std::cout << "wrote " << cfg.out_dir.string() << '\n';
    return 0;
  }
  if (*fit) {
    const TwoQubitHamiltonian h = build_hamiltonian(fit_f0.value_or(kDefaultF0), fit_f1.value_or(kDefaultF1));
    const FittedTargets f = fit_targets(load_ensemble(fit_experiment), h);
    if (fit_out.empty()) {
      std::cout << f.to_json().dump(2) << '\n';
    } else {
      write_json(fit_out, f.to_json());
    }
    return 0;
  }
  if (*ms) {
    const TwoQubitHamiltonian h = build_hamiltonian(ms_f0.value_or(kDefaultF0), ms_f1.value_or(kDefaultF1));
    const ExperimentEnsemble st = load_ensemble(ms_state);
    if (st.size() != 1) throw InvalidArgument("--state-file must hold exactly one state");
    const HermitianOperator& rho = st.states.front();
    HermitianOperator ref = rho;
    if (!ms_reference.empty()) {
      const ExperimentEnsemble r = load_ensemble(ms_reference);
      if (r.size() != 1) throw InvalidArgument("--reference must hold exactly one state");
      ref = r.states.front();
    }
    std::cout << report_json(measure_state(rho, ref, h)).dump(2) << '\n';
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const qperturb::SolverDiverged& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolverAbort;
  } catch (const qperturb::ParseError& e) {
    std::cerr << "parse error (line " << e.line() << "): " << e.what() << '\n';
    return kExitInvalid;
  } catch (const qperturb::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const qperturb::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
}
