#include "qperturb/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "qperturb/errors.hpp"

namespace qperturb {

namespace {

using ojson = nlohmann::ordered_json;

ojson coefficients_to_json(const PauliCoefficients& p) {
  ojson rows = ojson::array();
  for (std::size_t i = 0; i < 4; ++i) rows.push_back({p(i, 0), p(i, 1), p(i, 2), p(i, 3)});
  return rows;
}

PauliCoefficients coefficients_from_json(const nlohmann::json& j, const char* field) {
  PauliCoefficients p;
  if (j.is_number()) {
    for (std::size_t k = 0; k < 16; ++k) p.flat(k) = j.get<double>();
    return p;
  }
  if (!j.is_array() || j.size() != 4) {
    throw InvalidArgument(std::string(field) + " must be a number or a 4x4 array");
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (!j[i].is_array() || j[i].size() != 4) throw InvalidArgument(std::string(field) + " row must have 4 entries");
    for (std::size_t k = 0; k < 4; ++k) p(i, k) = j[i][k].get<double>();
  }
  return p;
}

bool is_uniform(const PauliCoefficients& p) {
  for (std::size_t k = 1; k < 16; ++k)
    if (p.flat(k) != p.flat(0)) return false;
  return true;
}

ojson target_to_json(const NormalTarget& t) { return ojson{{"mean", t.mean}, {"stddev", t.stddev}}; }

NormalTarget target_from_json(const nlohmann::json& j) {
  return {j.at("mean").get<double>(), j.at("stddev").get<double>()};
}

ojson moments_to_json(const Moments& m) {
  return ojson{{"mean", m.mean}, {"stddev", m.stddev}, {"count", m.count}};
}

const char* baseline_kind_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::BellDiagonal: return "bell_diagonal";
    case BaselineKind::StateFile: return "state_file";
    case BaselineKind::PureBell: return "pure_bell";
  }
  return "?";
}

std::vector<double> column(const std::vector<SampleMeasures>& rows, const std::string& name) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(measure_value(r.report, name));
  return out;
}

std::vector<double> column(const std::vector<MeasureReport>& rows, const std::string& name) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(measure_value(r, name));
  return out;
}

std::vector<PauliCoefficients> experiment_etas(const ExperimentEnsemble& ensemble, const HermitianOperator& gamma0) {
  std::vector<PauliCoefficients> etas;
  etas.reserve(ensemble.size());
  for (const auto& rho : ensemble.states) etas.push_back(recover_eta(matrix_sqrt_psd(rho), gamma0));
  return etas;
}

}  // namespace

void RunConfig::set_uniform_sigma(double s) {
  for (std::size_t k = 0; k < 16; ++k) sigma.flat(k) = s;
}

bool RunConfig::has(ConstraintKind kind) const {
  return std::find(constraints.begin(), constraints.end(), kind) != constraints.end();
}

TwoQubitHamiltonian RunConfig::resolved_hamiltonian() const {
  if (hamiltonian) return build_hamiltonian((*hamiltonian)[0], (*hamiltonian)[1]);
  return build_hamiltonian(kDefaultF0, kDefaultF1);
}

void RunConfig::validate() const {
  if (samples == 0) throw InvalidArgument("samples must be positive");
  if (bins == 0) throw InvalidArgument("bins must be positive");
  if (constraints.empty() || constraints.front() != ConstraintKind::UnitTrace) {
    throw InvalidArgument("constraints must start with trace");
  }
  if (has(ConstraintKind::Energy) && !hamiltonian) {
    throw InvalidArgument("the energy constraint needs a hamiltonian (f0, f1)");
  }
  if (energy_dist && !has(ConstraintKind::Energy)) {
    throw InvalidArgument("energy_dist given without the energy constraint");
  }
  if (entropy_dist && !has(ConstraintKind::Entropy)) {
    throw InvalidArgument("entropy_dist given without the entropy constraint");
  }
  for (const auto* d : {&energy_dist, &entropy_dist}) {
    if (*d && !((*d)->stddev >= 0.0 && std::isfinite((*d)->mean))) {
      throw InvalidArgument("target distribution needs a finite mean and stddev >= 0");
    }
  }
  if (!(max_failure_rate >= 0.0 && max_failure_rate <= 1.0)) {
    throw InvalidArgument("max_failure_rate must lie in [0, 1]");
  }
  PerturbationConfig{mu, sigma, seed, samples}.validate();
  if (baseline.kind == BaselineKind::StateFile && baseline.path.empty()) {
    throw InvalidArgument("state_file baseline needs a path");
  }
}

ojson RunConfig::to_json() const {
  // Output directory and worker count are left out: neither changes results.
  ojson j;
  ojson b;
  b["kind"] = baseline_kind_name(baseline.kind);
  switch (baseline.kind) {
    case BaselineKind::BellDiagonal: b["coefficients"] = baseline.coefficients; break;
    case BaselineKind::StateFile: b["path"] = baseline.path.generic_string(); break;
    case BaselineKind::PureBell: b["label"] = bell_label_name(baseline.label); break;
  }
  j["baseline"] = std::move(b);
  ojson cons = ojson::array();
  for (ConstraintKind k : constraints) cons.push_back(to_string(k));
  j["constraints"] = std::move(cons);
  if (hamiltonian) j["hamiltonian"] = ojson{{"f0", (*hamiltonian)[0]}, {"f1", (*hamiltonian)[1]}};
  if (is_uniform(sigma)) {
    j["sigma"] = sigma.flat(0);
  } else {
    j["sigma"] = coefficients_to_json(sigma);
  }
  j["mu"] = coefficients_to_json(mu);
  j["samples"] = samples;
  j["seed"] = seed;
  if (energy_dist) j["energy_dist"] = target_to_json(*energy_dist);
  if (entropy_dist) j["entropy_dist"] = target_to_json(*entropy_dist);
  j["bins"] = bins;
  j["policy"] = policy == FailurePolicy::Redraw ? "redraw" : "abort";
  j["max_failure_rate"] = max_failure_rate;
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    if (j.contains("baseline")) {
      const auto& b = j.at("baseline");
      const std::string kind = b.value("kind", "bell_diagonal");
      if (kind == "bell_diagonal") {
        c.baseline.kind = BaselineKind::BellDiagonal;
        if (b.contains("coefficients")) c.baseline.coefficients = b.at("coefficients").get<std::array<double, 4>>();
      } else if (kind == "state_file") {
        c.baseline.kind = BaselineKind::StateFile;
        c.baseline.path = b.at("path").get<std::string>();
      } else if (kind == "pure_bell") {
        c.baseline.kind = BaselineKind::PureBell;
        c.baseline.label = parse_bell_label(b.value("label", "phi+"));
      } else {
        throw InvalidArgument("unknown baseline kind '" + kind + "'");
      }
    }
    if (j.contains("constraints")) {
      const auto& cons = j.at("constraints");
      if (cons.is_string()) {
        c.constraints = parse_constraint_list(cons.get<std::string>());
      } else {
        std::string joined;
        for (const auto& s : cons) joined += (joined.empty() ? "" : ",") + s.get<std::string>();
        c.constraints = parse_constraint_list(joined);
      }
    }
    if (j.contains("hamiltonian") && !j.at("hamiltonian").is_null()) {
      const auto& h = j.at("hamiltonian");
      c.hamiltonian = std::array<double, 2>{h.at("f0").get<double>(), h.at("f1").get<double>()};
    }
    if (j.contains("sigma")) c.sigma = coefficients_from_json(j.at("sigma"), "sigma");
    if (j.contains("mu")) c.mu = coefficients_from_json(j.at("mu"), "mu");
    if (j.contains("samples")) c.samples = j.at("samples").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("energy_dist")) c.energy_dist = target_from_json(j.at("energy_dist"));
    if (j.contains("entropy_dist")) c.entropy_dist = target_from_json(j.at("entropy_dist"));
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("bins")) c.bins = j.at("bins").get<std::size_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
    if (j.contains("policy")) {
      const std::string p = j.at("policy").get<std::string>();
      if (p == "redraw") {
        c.policy = FailurePolicy::Redraw;
      } else if (p == "abort") {
        c.policy = FailurePolicy::Abort;
      } else {
        throw InvalidArgument("policy must be redraw or abort");
      }
    }
    if (j.contains("max_failure_rate")) c.max_failure_rate = j.at("max_failure_rate").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  return c;
}

std::vector<ConstraintKind> parse_constraint_list(const std::string& text) {
  std::vector<ConstraintKind> out;
  std::istringstream in(text);
  std::string token;
  while (std::getline(in, token, ',')) {
    const auto b = token.find_first_not_of(" \t");
    const auto e = token.find_last_not_of(" \t");
    token = b == std::string::npos ? "" : token.substr(b, e - b + 1);
    if (token == "trace") {
      out.push_back(ConstraintKind::UnitTrace);
    } else if (token == "energy") {
      out.push_back(ConstraintKind::Energy);
    } else if (token == "entropy") {
      out.push_back(ConstraintKind::Entropy);
    } else {
      throw InvalidArgument("unknown constraint '" + token + "'");
    }
  }
  if (out.empty()) throw InvalidArgument("empty constraint list");
  // Trace first, the rest in canonical order.
  std::sort(out.begin(), out.end(), [](ConstraintKind a, ConstraintKind b) {
    return static_cast<int>(a) < static_cast<int>(b);
  });
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) throw InvalidArgument("duplicate constraint");
  if (out.front() != ConstraintKind::UnitTrace) out.insert(out.begin(), ConstraintKind::UnitTrace);
  return out;
}

std::string constraint_list_name(const std::vector<ConstraintKind>& kinds) {
  std::string s;
  for (ConstraintKind k : kinds) s += (s.empty() ? "" : ",") + std::string(to_string(k));
  return s;
}

BellLabel parse_bell_label(const std::string& text) {
  if (text == "phi+" || text == "PhiPlus") return BellLabel::PhiPlus;
  if (text == "phi-" || text == "PhiMinus") return BellLabel::PhiMinus;
  if (text == "psi+" || text == "PsiPlus") return BellLabel::PsiPlus;
  if (text == "psi-" || text == "PsiMinus") return BellLabel::PsiMinus;
  throw InvalidArgument("unknown Bell label '" + text + "' (phi+, phi-, psi+, psi-)");
}

std::string bell_label_name(BellLabel label) {
  switch (label) {
    case BellLabel::PhiPlus: return "phi+";
    case BellLabel::PhiMinus: return "phi-";
    case BellLabel::PsiPlus: return "psi+";
    case BellLabel::PsiMinus: return "psi-";
  }
  return "?";
}

Baseline resolve_baseline(const BaselineSpec& spec) {
  switch (spec.kind) {
    case BaselineKind::BellDiagonal: {
      const BellDiagonalState st = bell_diagonal_state(spec.coefficients);
      const BellDiagonalRoot root = bell_diagonal_sqrt(st.spec);
      return {st.rho0, root.gamma0, root.eta0};
    }
    case BaselineKind::PureBell: {
      // A rank-one projector is its own square root.
      HermitianOperator p = bell_projector(spec.label);
      return {p, p, pauli_project(p)};
    }
    case BaselineKind::StateFile: {
      const ExperimentEnsemble e = load_ensemble(spec.path);
      if (e.size() != 1) {
        throw InvalidArgument("baseline file must hold exactly one state, found " + std::to_string(e.size()));
      }
      HermitianOperator gamma0 = matrix_sqrt_psd(e.states.front());
      PauliCoefficients eta0 = pauli_project(gamma0);
      return {e.states.front(), std::move(gamma0), eta0};
    }
  }
  throw InvalidArgument("unknown baseline kind");
}

ConstraintSet build_constraints(const RunConfig& config, const Baseline& baseline) {
  std::optional<TwoQubitHamiltonian> h;
  if (config.has(ConstraintKind::Energy)) h = config.resolved_hamiltonian();
  ConstraintSet set = ConstraintSet::for_baseline(config.constraints, baseline.rho0, h);
  if (config.energy_dist) set.at(ConstraintKind::Energy).sampled = *config.energy_dist;
  if (config.entropy_dist) set.at(ConstraintKind::Entropy).sampled = *config.entropy_dist;
  return set;
}

const std::vector<std::string>& sample_columns() {
  static const std::vector<std::string> cols = {
      "index",  "energy", "entropy", "mutual_information", "concurrence",  "chsh_max",
      "fidelity", "theta", "chord", "solver_iterations", "residual_max"};
  return cols;
}

const std::vector<std::string>& measure_names() {
  static const std::vector<std::string> names = {
      "energy", "entropy", "mutual_information", "concurrence", "chsh_max", "fidelity", "theta", "chord"};
  return names;
}

double measure_value(const MeasureReport& r, const std::string& name) {
  if (name == "energy") return r.energy;
  if (name == "entropy") return r.entropy;
  if (name == "mutual_information") return r.mutual_information;
  if (name == "concurrence") return r.concurrence;
  if (name == "chsh_max") return r.chsh_max;
  if (name == "fidelity") return r.fidelity;
  if (name == "theta") return r.theta;
  if (name == "chord") return r.chord;
  throw InvalidArgument("unknown measure '" + name + "'");
}

CaseResult run_case(const RunConfig& config, const std::string& name, DistanceForm form) {
  config.validate();
  const Baseline base = resolve_baseline(config.baseline);
  const ConstraintSet constraints = build_constraints(config, base);
  const TwoQubitHamiltonian h = config.resolved_hamiltonian();

  const PerturbationConfig pc{config.mu, config.sigma, config.seed, config.samples};
  EnsembleOptions opts;
  opts.policy = config.policy;
  opts.threads = config.threads;

  CaseResult out;
  out.name = name;
  try {
    out.ensemble = generate_ensemble(base.gamma0, pc, constraints, opts);
  } catch (const SolverDiverged& e) {
    throw SolverFailureAbort(name + ": " + e.what());
  }
  if (out.ensemble.failure_rate() > config.max_failure_rate) {
    throw SolverFailureAbort(fmt::format(
        "{}: {} of {} solves failed (rate {:.3f} > {:.3f}); check the constraint targets", name,
        out.ensemble.failures, out.ensemble.attempts, out.ensemble.failure_rate(), config.max_failure_rate));
  }

  const auto& samples = out.ensemble.samples;
  out.measures.resize(samples.size());
  parallel_for(samples.size(), config.threads, [&](std::size_t i) {
    const PerturbedSample& s = samples[i];
    SampleMeasures m;
    m.index = s.index;
    m.report = form == DistanceForm::PerturbedRoot
                   ? measure_state(s.rho_r, base.rho0, h, &s.gamma_r, &base.gamma0)
                   : measure_state(s.rho_r, base.rho0, h);
    m.solver_iterations = s.solver_iterations;
    for (double r : s.residuals) m.residual_max = std::max(m.residual_max, std::abs(r));
    out.measures[i] = m;
  });

  std::vector<PauliCoefficients> raw, constrained;
  raw.reserve(samples.size());
  constrained.reserve(samples.size());
  for (const auto& s : samples) {
    raw.push_back(s.eta_raw);
    constrained.push_back(s.eta_constrained);
  }
  if (samples.size() >= 3) {
    out.corr_constrained = pearson_matrix(constrained);
    out.corr_raw = pearson_matrix(raw);
  }

  ojson& sum = out.summary;
  sum["case"] = name;
  sum["seed"] = config.seed;
  sum["config"] = config.to_json();
  sum["distance_form"] = form == DistanceForm::PerturbedRoot ? "perturbed_root" : "psd_root";
  sum["samples"] = samples.size();
  sum["attempts"] = out.ensemble.attempts;
  sum["failures"] = out.ensemble.failures;
  sum["failure_rate"] = out.ensemble.failure_rate();

  const MeasureReport b = measure_state(base.rho0, base.rho0, h);
  sum["baseline"] = ojson{{"energy", b.energy},
                          {"entropy", b.entropy},
                          {"mutual_information", b.mutual_information},
                          {"concurrence", b.concurrence},
                          {"chsh_max", b.chsh_max}};
  ojson targets = ojson::array();
  for (const Constraint& c : constraints.items()) {
    ojson t{{"kind", to_string(c.kind)}, {"target", c.target}};
    if (c.sampled) t["sampled"] = target_to_json(*c.sampled);
    targets.push_back(std::move(t));
  }
  sum["constraints"] = std::move(targets);

  ojson measures;
  for (const auto& m : measure_names()) {
    const std::vector<double> col = column(out.measures, m);
    measures[m] = moments_to_json(moments(col));
  }
  sum["measures"] = std::move(measures);

  double res_max = 0.0;
  int it_max = 0;
  std::vector<double> its;
  for (const auto& m : out.measures) {
    res_max = std::max(res_max, m.residual_max);
    it_max = std::max(it_max, m.solver_iterations);
    its.push_back(m.solver_iterations);
  }
  sum["residual_max"] = res_max;
  sum["solver_iterations"] = ojson{{"mean", moments(its).mean}, {"max", it_max}};
  if (samples.size() >= 3) {
    sum["corr_off_diagonal_norm"] = ojson{{"constrained", out.corr_constrained.off_diagonal_norm()},
                                          {"raw", out.corr_raw.off_diagonal_norm()}};
  }
  return out;
}

void write_case(const CaseResult& result, const RunConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::vector<double>> rows;
  rows.reserve(result.measures.size());
  for (const auto& m : result.measures) {
    std::vector<double> row{static_cast<double>(m.index)};
    for (const auto& name : measure_names()) row.push_back(measure_value(m.report, name));
    row.push_back(m.solver_iterations);
    row.push_back(m.residual_max);
    rows.push_back(std::move(row));
  }
  write_csv(dir / "samples.csv", sample_columns(), rows);

  std::vector<PauliCoefficients> raw, constrained;
  ExperimentEnsemble rhos;
  for (const auto& s : result.ensemble.samples) {
    raw.push_back(s.eta_raw);
    constrained.push_back(s.eta_constrained);
    rhos.states.push_back(s.rho_r);
  }
  write_eta_csv(dir / "etas_raw.csv", raw);
  write_eta_csv(dir / "etas_constrained.csv", constrained);
  if (result.ensemble.samples.size() >= 3) {
    write_correlation_csv(dir / "corr.csv", result.corr_constrained);
    write_correlation_csv(dir / "corr_raw.csv", result.corr_raw);
  }
  for (const auto& name : measure_names()) {
    const std::vector<double> col = column(result.measures, name);
    if (col.empty()) continue;
    write_json(dir / ("hist_" + name + ".json"), histogram_to_json(histogram_density(col, config.bins), name));
  }
  save_ensemble(dir / "rho_r.json", rhos, EnsembleFormat::Json);
  write_json(dir / "summary.json", result.summary);
}

std::vector<CaseResult> run_cases(const RunConfig& config, bool all_cases) {
  std::vector<CaseResult> out;
  if (!all_cases) {
    out.push_back(run_case(config, "case"));
    write_case(out.back(), config, config.out_dir);
    return out;
  }
  using K = ConstraintKind;
  const std::vector<std::vector<K>> cases = {
      {K::UnitTrace}, {K::UnitTrace, K::Energy}, {K::UnitTrace, K::Entropy}, {K::UnitTrace, K::Energy, K::Entropy}};
  for (std::size_t i = 0; i < cases.size(); ++i) {
    RunConfig c = config;
    c.constraints = cases[i];
    if (c.has(K::Energy) && !c.hamiltonian) c.hamiltonian = std::array<double, 2>{kDefaultF0, kDefaultF1};
    if (!c.has(K::Energy)) c.energy_dist.reset();
    if (!c.has(K::Entropy)) c.entropy_dist.reset();
    const std::string name = "case" + std::to_string(i + 1);
    out.push_back(run_case(c, name));
    write_case(out.back(), c, config.out_dir / name);
  }
  return out;
}

ojson FittedTargets::to_json() const {
  return ojson{{"count", count},
               {"energy", moments_to_json(energy)},
               {"entropy", moments_to_json(entropy)},
               {"mu_eta", coefficients_to_json(mu_eta)},
               {"sigma_eta", coefficients_to_json(sigma_eta)}};
}

FittedTargets fit_targets(const ExperimentEnsemble& ensemble, const TwoQubitHamiltonian& hamiltonian) {
  return fit_targets(ensemble, hamiltonian, bell_projector(BellLabel::PhiPlus));
}

FittedTargets fit_targets(const ExperimentEnsemble& ensemble, const TwoQubitHamiltonian& hamiltonian,
                          const HermitianOperator& gamma0) {
  if (ensemble.empty()) throw InvalidArgument("cannot fit targets to an empty ensemble");
  std::vector<double> e, s;
  for (const auto& rho : ensemble.states) {
    e.push_back(energy_expectation(rho, hamiltonian));
    s.push_back(von_neumann_entropy(rho));
  }
  const std::vector<PauliCoefficients> etas = experiment_etas(ensemble, gamma0);
  FittedTargets f;
  f.count = ensemble.size();
  f.energy = moments(e);
  f.entropy = moments(s);
  for (std::size_t k = 0; k < 16; ++k) {
    std::vector<double> col;
    col.reserve(etas.size());
    for (const auto& eta : etas) col.push_back(eta.flat(k));
    const Moments m = moments(col);
    f.mu_eta.flat(k) = m.mean;
    f.sigma_eta.flat(k) = m.stddev;
  }
  return f;
}

ComparisonResult compare_to_experiment(const RunConfig& config, const ExperimentEnsemble& ensemble,
                                       bool write_outputs) {
  if (config.baseline.kind != BaselineKind::PureBell || config.baseline.label != BellLabel::PhiPlus) {
    throw InvalidArgument("comparison runs around the pure phi+ baseline");
  }
  if (ensemble.size() < 3) throw InvalidArgument("comparison needs at least 3 experimental states");

  const TwoQubitHamiltonian h = config.resolved_hamiltonian();
  const Baseline base = resolve_baseline(config.baseline);
  const FittedTargets fitted = fit_targets(ensemble, h, base.gamma0);

  RunConfig cfg = config;
  if (cfg.has(ConstraintKind::Energy) && !cfg.energy_dist) {
    cfg.energy_dist = NormalTarget{fitted.energy.mean, fitted.energy.stddev};
  }
  if (cfg.has(ConstraintKind::Entropy) && !cfg.entropy_dist) {
    cfg.entropy_dist = NormalTarget{fitted.entropy.mean, fitted.entropy.stddev};
  }
  const bool sigma_given = std::any_of(cfg.sigma.eta.begin(), cfg.sigma.eta.end(), [](const auto& row) {
    return std::any_of(row.begin(), row.end(), [](double v) { return v != 0.0; });
  });
  if (!sigma_given) {
    cfg.sigma = fitted.sigma_eta;
    cfg.mu = fitted.mu_eta;
  }

  ComparisonResult out;
  out.simulated = run_case(cfg, "simulated", DistanceForm::PsdRoot);
  out.simulated.summary["fitted"] = fitted.to_json();

  out.experiment.resize(ensemble.size());
  parallel_for(ensemble.size(), cfg.threads, [&](std::size_t i) {
    out.experiment[i] = measure_state(ensemble.states[i], base.rho0, h);
  });
  const std::vector<PauliCoefficients> etas = experiment_etas(ensemble, base.gamma0);
  out.corr_experiment = pearson_matrix(etas);

  for (const auto& name : measure_names()) {
    MeasureOverlap o;
    o.measure = name;
    o.experiment = moments(column(out.experiment, name));
    o.simulated = moments(column(out.simulated.measures, name));
    o.mean_difference = o.simulated.mean - o.experiment.mean;
    o.stddev_ratio = o.experiment.stddev > 0.0 ? o.simulated.stddev / o.experiment.stddev : 0.0;
    out.overlap.push_back(o);
  }

  if (!write_outputs) return out;

  const std::filesystem::path& dir = cfg.out_dir;
  write_case(out.simulated, cfg, dir / "simulated");

  std::vector<std::string> header{"index"};
  for (const auto& name : measure_names()) header.push_back(name);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < out.experiment.size(); ++i) {
    std::vector<double> row{static_cast<double>(i)};
    for (const auto& name : measure_names()) row.push_back(measure_value(out.experiment[i], name));
    rows.push_back(std::move(row));
  }
  write_csv(dir / "experiment_measures.csv", header, rows);
  write_eta_csv(dir / "etas_experiment.csv", etas);

  {
    // Rows pair the i-th experimental state with the i-th simulated sample;
    // the shorter side leaves its cells empty.
    std::ofstream paired(dir / "measures_paired.csv", std::ios::binary);
    if (!paired) throw InvalidArgument("cannot write '" + (dir / "measures_paired.csv").string() + "'");
    paired << "index";
    for (const auto& name : measure_names()) paired << ",experiment_" << name << ",simulated_" << name;
    paired << '\n';
    const std::size_t n = std::max(out.experiment.size(), out.simulated.measures.size());
    for (std::size_t i = 0; i < n; ++i) {
      paired << i;
      for (const auto& name : measure_names()) {
        paired << ',';
        if (i < out.experiment.size()) paired << format_double(measure_value(out.experiment[i], name));
        paired << ',';
        if (i < out.simulated.measures.size()) {
          paired << format_double(measure_value(out.simulated.measures[i].report, name));
        }
      }
      paired << '\n';
    }
  }

  write_correlation_csv(dir / "corr_experiment.csv", out.corr_experiment);
  write_correlation_csv(dir / "corr_simulated.csv", out.simulated.corr_constrained);

  ojson ov;
  ov["fitted"] = fitted.to_json();
  ov["config"] = cfg.to_json();
  ojson list = ojson::array();
  for (const auto& o : out.overlap) {
    list.push_back(ojson{{"measure", o.measure},
                         {"experiment", moments_to_json(o.experiment)},
                         {"simulated", moments_to_json(o.simulated)},
                         {"mean_difference", o.mean_difference},
                         {"stddev_ratio", o.stddev_ratio}});
  }
  ov["measures"] = std::move(list);
  ov["corr_off_diagonal_norm"] = ojson{{"experiment", out.corr_experiment.off_diagonal_norm()},
                                       {"simulated", out.simulated.corr_constrained.off_diagonal_norm()}};
  write_json(dir / "overlap.json", ov);
  return out;
}

}  // namespace qperturb
