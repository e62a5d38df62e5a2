#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracle.hpp"
#include "qperturb/errors.hpp"
#include "qperturb/io.hpp"
#include "qperturb/pipeline.hpp"

using namespace qperturb;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("qperturb_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::size_t count_char(const std::string& s, char c) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), c)); }

ExperimentEnsemble ensemble_of(std::vector<HermitianOperator> states) {
  ExperimentEnsemble e;
  e.sources.resize(states.size());
  e.states = std::move(states);
  return e;
}

RunConfig small_config(const fs::path& out, std::size_t n = 60) {
  RunConfig c;
  c.samples = n;
  c.seed = 5;
  c.set_uniform_sigma(0.05);
  c.out_dir = out;
  c.threads = 1;
  return c;
}

}  // namespace

TEST_CASE("ensemble JSON round trip is bit exact") {
  const fs::path dir = scratch("roundtrip");
  std::mt19937_64 rng(3);
  std::vector<HermitianOperator> states;
  for (int i = 0; i < 20; ++i) states.push_back(oracle::random_density(rng, 4, 1 + i % 4));
  ExperimentEnsemble e = ensemble_of(states);
  e.sources[3] = "run 3";
  // Skip states the validator would clamp; those are not stored verbatim.
  save_ensemble(dir / "e.json", e);
  const ExperimentEnsemble back = load_ensemble(dir / "e.json");
  REQUIRE(back.size() == e.size());
  CHECK(back.sources[3] == "run 3");
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (eig_hermitian(e.states[i]).eigenvalues.front() < 0.0) continue;
    CHECK(back.states[i].matrix() == e.states[i].matrix());
  }

  save_ensemble(dir / "e.csv", e, EnsembleFormat::Csv);
  const ExperimentEnsemble csv = load_ensemble(dir / "e.csv");
  CHECK(csv.size() == e.size());
  CHECK(csv.sources[3] == "run 3");
}

TEST_CASE("ideal Bell state loads cleanly") {
  const fs::path dir = scratch("bell");
  save_ensemble(dir / "phi.json", ensemble_of({bell_projector(BellLabel::PhiPlus)}));
  const ExperimentEnsemble e = load_ensemble(dir / "phi.json");
  REQUIRE(e.size() == 1);
  CHECK(e.states[0].matrix() == bell_projector(BellLabel::PhiPlus).matrix());
}

TEST_CASE("validation names the offending state") {
  const fs::path dir = scratch("invalid");
  const HermitianOperator ok = 0.25 * HermitianOperator::identity(4);
  const HermitianOperator low = 0.225 * HermitianOperator::identity(4);
  save_ensemble(dir / "bad.json", ensemble_of({ok, ok, low}));
  try {
    load_ensemble(dir / "bad.json");
    FAIL("expected a validation error");
  } catch (const ValidationError& err) {
    CHECK(err.index() == 2);
  }

  const std::array<double, 4> neg = {-1e-3, 0.5, 0.25, 0.251};
  save_ensemble(dir / "neg.json", ensemble_of({HermitianOperator(ComplexMatrix::diagonal(neg))}));
  CHECK_THROWS_AS(load_ensemble(dir / "neg.json"), ValidationError);

  // Tiny negative eigenvalues are clamped and renormalized.
  const std::array<double, 4> tiny = {-5e-7, 0.5, 0.25, 0.2500005};
  save_ensemble(dir / "tiny.json", ensemble_of({HermitianOperator(ComplexMatrix::diagonal(tiny))}));
  const ExperimentEnsemble t = load_ensemble(dir / "tiny.json");
  CHECK(eig_hermitian(t.states[0]).eigenvalues.front() >= 0.0);
  CHECK(t.states[0].trace() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("CSV ensembles with a header and source column") {
  const fs::path dir = scratch("csv");
  std::string row = "0.5,0,0,0,0,0,0.5,0";
  row += ",0,0,0,0,0,0,0,0";
  row += ",0,0,0,0,0,0,0,0";
  row += ",0.5,0,0,0,0,0,0.5,0";
  write_text(dir / "s.csv", "re00,im00,...\n" + row + ",shot-a\n" + row + "\n");
  const ExperimentEnsemble e = load_ensemble(dir / "s.csv");
  REQUIRE(e.size() == 2);
  CHECK(e.sources[0] == "shot-a");
  CHECK(oracle::max_abs_diff(oracle::to_eigen(e.states[1]), oracle::to_eigen(bell_projector(BellLabel::PhiPlus))) < 1e-15);
}

TEST_CASE("parse errors carry a line number") {
  try {
    parse_ensemble_json("{\n \"states\": [\n  {\"rho\": [1, 2,,]}\n ]\n}");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  try {
    parse_ensemble_csv("re00,im00\n1,0,0\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_ensemble_json("{\"states\": [{\"rho\": [[1]]}]}"), ParseError);
  CHECK_THROWS_AS(format_from_path("x.txt"), InvalidArgument);
}

TEST_CASE("fitting an ideal ensemble gives zero spread") {
  const auto h = build_hamiltonian(4.963, 4.838);
  const HermitianOperator phi = bell_projector(BellLabel::PhiPlus);
  const FittedTargets f = fit_targets(ensemble_of({phi, phi, phi, phi}), h);
  CHECK(std::abs(f.energy.mean) < 1e-12);
  CHECK(f.energy.stddev < 1e-12);
  CHECK(std::abs(f.entropy.mean) < 1e-12);
  for (std::size_t k = 0; k < 16; ++k) {
    CHECK(std::abs(f.mu_eta.flat(k)) < 1e-12);
    CHECK(std::abs(f.sigma_eta.flat(k)) < 1e-12);
  }
  CHECK_THROWS_AS(fit_targets(ExperimentEnsemble{}, h), InvalidArgument);
}

TEST_CASE("two-point fit uses the sample estimator") {
  const auto h = build_hamiltonian(4.963, 4.838);
  const FittedTargets f =
      fit_targets(ensemble_of({0.25 * HermitianOperator::identity(4), bell_projector(BellLabel::PhiPlus)}), h);
  const double ln4 = std::log(4.0);
  CHECK(f.entropy.mean == doctest::Approx(ln4 / 2).epsilon(1e-12));
  CHECK(f.entropy.stddev == doctest::Approx(ln4 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("fitted spread recovers the generating spread") {
  // Full-rank baseline so the PSD root of each sample equals its constrained root.
  const auto st = bell_diagonal_state({1.0, 0.3, 0.2, -0.1});
  const auto root = bell_diagonal_sqrt(st.spec);
  const double sigma = 0.02;
  const auto cfg = PerturbationConfig::uniform(sigma, 77, 200);
  const auto ens = generate_ensemble(root.gamma0, cfg, ConstraintSet::unit_trace(), {FailurePolicy::Redraw, 1});
  ExperimentEnsemble e;
  for (const auto& s : ens.samples) e.states.push_back(s.rho_r);
  e.sources.resize(e.states.size());
  const FittedTargets f = fit_targets(e, build_hamiltonian(4.963, 4.838), root.gamma0);
  const SquareMatrix16 cov = jacobian_covariance(root.eta0, PauliCoefficients{}, [&] {
    PauliCoefficients s;
    for (std::size_t k = 0; k < 16; ++k) s.flat(k) = sigma;
    return s;
  }());
  for (std::size_t k = 0; k < 16; ++k) {
    const double truth = std::sqrt(cov[k][k]);
    CHECK(std::abs(f.sigma_eta.flat(k) - truth) <= 0.15 * truth);
  }
}

TEST_CASE("run configuration round trip and validation") {
  RunConfig c;
  c.constraints = parse_constraint_list("entropy, trace,energy");
  CHECK(constraint_list_name(c.constraints) == "trace,energy,entropy");
  c.hamiltonian = std::array<double, 2>{4.9, 4.8};
  c.set_uniform_sigma(0.05);
  c.sigma(2, 3) = 0.07;
  c.mu(1, 1) = 0.01;
  c.energy_dist = NormalTarget{0.1, 0.2};
  c.baseline.kind = BaselineKind::PureBell;
  c.baseline.label = BellLabel::PsiMinus;
  c.seed = 18446744073709551615ull;
  const RunConfig back = RunConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  CHECK(back.to_json() == c.to_json());
  CHECK(back.seed == c.seed);
  CHECK(back.sigma == c.sigma);
  CHECK(back.baseline.label == BellLabel::PsiMinus);

  RunConfig no_h;
  no_h.constraints = {ConstraintKind::UnitTrace, ConstraintKind::Energy};
  CHECK_THROWS_AS(no_h.validate(), InvalidArgument);
  RunConfig stray;
  stray.entropy_dist = NormalTarget{0.5, 0.1};
  CHECK_THROWS_AS(stray.validate(), InvalidArgument);
  CHECK_THROWS_AS(parse_constraint_list("trace,spin"), InvalidArgument);
  CHECK_THROWS_AS(parse_bell_label("phi"), InvalidArgument);
}

TEST_CASE("case outputs have the fixed layout") {
  const fs::path dir = scratch("case");
  const RunConfig c = small_config(dir);
  run_cases(c);
  const auto samples = lines_of(dir / "samples.csv");
  REQUIRE(samples.size() == 61);
  CHECK(samples[0] ==
        "index,energy,entropy,mutual_information,concurrence,chsh_max,fidelity,theta,chord,solver_iterations,residual_max");
  for (const auto& l : samples) CHECK(count_char(l, ',') == 10);
  for (const char* f : {"etas_raw.csv", "etas_constrained.csv"}) {
    const auto rows = lines_of(dir / f);
    CHECK(rows.size() == 61);
    CHECK(count_char(rows[0], ',') == 15);
  }
  CHECK(lines_of(dir / "corr.csv").size() == 17);
  for (const auto& m : measure_names()) {
    const auto j = nlohmann::json::parse(read_file(dir / ("hist_" + m + ".json")));
    double area = 0.0;
    for (std::size_t i = 0; i < j["densities"].size(); ++i)
      area += j["densities"][i].get<double>() * (j["edges"][i + 1].get<double>() - j["edges"][i].get<double>());
    CHECK(std::abs(area - 1.0) < 1e-9);
  }
  const auto summary = nlohmann::json::parse(read_file(dir / "summary.json"));
  CHECK(summary["seed"] == 5);
  CHECK(summary["measures"].contains("theta"));
}

TEST_CASE("emitted states reload and validate tightly") {
  const fs::path dir = scratch("reload");
  RunConfig c = small_config(dir, 40);
  c.constraints = {ConstraintKind::UnitTrace, ConstraintKind::Energy, ConstraintKind::Entropy};
  c.hamiltonian = std::array<double, 2>{kDefaultF0, kDefaultF1};
  run_cases(c);
  const ExperimentEnsemble e = load_ensemble(dir / "rho_r.json");
  REQUIRE(e.size() == 40);
  for (const auto& rho : e.states) {
    CHECK(std::abs(rho.trace() - 1.0) <= 1e-9);
    CHECK(oracle::eigenvalues(rho).front() >= -1e-9);
  }
}

TEST_CASE("sampled targets are reproduced row by row") {
  const fs::path dir = scratch("targets");
  RunConfig c = small_config(dir, 80);
  c.constraints = {ConstraintKind::UnitTrace, ConstraintKind::Energy, ConstraintKind::Entropy};
  c.hamiltonian = std::array<double, 2>{kDefaultF0, kDefaultF1};
  c.energy_dist = NormalTarget{0.0, 0.3};
  c.entropy_dist = NormalTarget{0.6, 0.02};
  const CaseResult r = run_case(c);
  const auto h = c.resolved_hamiltonian();
  for (std::size_t i = 0; i < r.measures.size(); ++i) {
    const auto& s = r.ensemble.samples[i];
    CHECK(std::abs(r.measures[i].report.energy - s.targets[1]) <= 1e-8);
    CHECK(std::abs(r.measures[i].report.entropy - s.targets[2]) <= 1e-8);
    CHECK(std::abs(energy_expectation(s.rho_r, h) - s.targets[1]) <= 1e-8);
  }
}

TEST_CASE("unreachable targets abort with a diagnostic") {
  const fs::path dir = scratch("abort");
  RunConfig c = small_config(dir, 20);
  c.baseline.kind = BaselineKind::PureBell;
  c.set_uniform_sigma(0.01);
  c.constraints = {ConstraintKind::UnitTrace, ConstraintKind::Entropy};
  c.entropy_dist = NormalTarget{1.3, 0.0};
  CHECK_THROWS_AS(run_case(c), SolverFailureAbort);
}

TEST_CASE("all four cases land in their own directories") {
  const fs::path dir = scratch("all");
  RunConfig c = small_config(dir, 30);
  const auto results = run_cases(c, true);
  REQUIRE(results.size() == 4);
  for (int i = 1; i <= 4; ++i) CHECK(fs::exists(dir / ("case" + std::to_string(i)) / "summary.json"));
  const auto s4 = nlohmann::json::parse(read_file(dir / "case4" / "summary.json"));
  CHECK(s4["config"]["constraints"].size() == 3);
}

TEST_CASE("identical configurations write identical bytes") {
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  RunConfig c = small_config(a, 50);
  c.constraints = {ConstraintKind::UnitTrace, ConstraintKind::Entropy};
  run_cases(c);
  c.out_dir = b;
  c.threads = 3;
  run_cases(c);
  for (const auto& entry : fs::directory_iterator(a)) {
    const fs::path other = b / entry.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(read_file(entry.path()) == read_file(other));
  }
}

TEST_CASE("self comparison shows no systematic difference") {
  const fs::path dir = scratch("compare");
  RunConfig gen = small_config(dir / "gen", 300);
  gen.baseline.kind = BaselineKind::PureBell;
  gen.constraints = {ConstraintKind::UnitTrace, ConstraintKind::Energy, ConstraintKind::Entropy};
  gen.hamiltonian = std::array<double, 2>{kDefaultF0, kDefaultF1};
  gen.energy_dist = NormalTarget{0.0, 0.5};
  gen.entropy_dist = NormalTarget{0.55, 0.05};
  const CaseResult experiment = run_case(gen, "experiment", DistanceForm::PsdRoot);
  ExperimentEnsemble e;
  for (const auto& s : experiment.ensemble.samples) e.states.push_back(s.rho_r);
  e.sources.resize(e.states.size());

  RunConfig cmp = gen;
  cmp.seed = 6;
  cmp.out_dir = dir / "cmp";
  const ComparisonResult res = compare_to_experiment(cmp, e);
  for (const auto& o : res.overlap) {
    INFO(o.measure);
    const double se = std::hypot(o.experiment.stddev, o.simulated.stddev) / std::sqrt(300.0);
    CHECK(std::abs(o.mean_difference) <= 4.0 * se + 1e-9);
  }
  for (const char* f : {"measures_paired.csv", "corr_experiment.csv", "corr_simulated.csv", "overlap.json",
                        "experiment_measures.csv", "simulated/samples.csv"}) {
    CHECK(fs::exists(cmp.out_dir / f));
  }
  RunConfig wrong = cmp;
  wrong.baseline.kind = BaselineKind::BellDiagonal;
  CHECK_THROWS_AS(compare_to_experiment(wrong, e, false), InvalidArgument);
}

TEST_CASE("entropy spread follows the target spread") {
  const fs::path dir = scratch("spread");
  RunConfig c = small_config(dir, 300);
  c.baseline.kind = BaselineKind::PureBell;
  c.hamiltonian = std::array<double, 2>{kDefaultF0, kDefaultF1};
  c.constraints = {ConstraintKind::UnitTrace, ConstraintKind::Energy};
  c.energy_dist = NormalTarget{0.0, 0.5};
  const CaseResult two = run_case(c);
  c.constraints.push_back(ConstraintKind::Entropy);
  c.entropy_dist = NormalTarget{0.55, 0.005};
  const CaseResult four = run_case(c);
  const double sd2 = four.summary["measures"]["entropy"]["stddev"];
  const double sd1 = two.summary["measures"]["entropy"]["stddev"];
  CHECK(sd2 < 0.2 * sd1);
  CHECK(four.corr_constrained.off_diagonal_norm() > four.corr_raw.off_diagonal_norm());
}
