#pragma once

// Experiment orchestration: run configuration, the four constraint cases,
// target fitting from an experimental ensemble and the comparison pipeline.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qperturb/errors.hpp"
#include "qperturb/io.hpp"
#include "qperturb/measures.hpp"
#include "qperturb/perturb.hpp"
#include "qperturb/stats.hpp"

namespace qperturb {

inline constexpr std::array<double, 4> kDefaultBellCoefficients = {1.0, 0.996, 0.4, -0.4};
/// ibmq_manila qubits q0 and q1, GHz.
inline constexpr double kDefaultF0 = 4.963;
inline constexpr double kDefaultF1 = 4.838;
/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "QPERTURB_OUT_DIR";

enum class BaselineKind { BellDiagonal, StateFile, PureBell };

struct BaselineSpec {
  BaselineKind kind = BaselineKind::BellDiagonal;
  std::array<double, 4> coefficients = kDefaultBellCoefficients;
  std::filesystem::path path;
  BellLabel label = BellLabel::PhiPlus;
};

struct RunConfig {
  BaselineSpec baseline;
  std::vector<ConstraintKind> constraints{ConstraintKind::UnitTrace};
  /// Qubit frequencies in GHz. Defaults to kDefaultF0/kDefaultF1 for the
  /// energy column when not given; required when the energy constraint is on.
  std::optional<std::array<double, 2>> hamiltonian;
  PauliCoefficients sigma;
  PauliCoefficients mu;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  std::optional<NormalTarget> energy_dist;
  std::optional<NormalTarget> entropy_dist;
  std::filesystem::path out_dir = "qperturb_out";
  std::size_t bins = kDefaultBins;
  unsigned threads = 0;
  FailurePolicy policy = FailurePolicy::Redraw;
  /// Abort when more than this fraction of attempts fails to converge.
  double max_failure_rate = 0.10;

  void set_uniform_sigma(double s);
  void validate() const;
  TwoQubitHamiltonian resolved_hamiltonian() const;
  bool has(ConstraintKind kind) const;

  nlohmann::ordered_json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

/// Parses "trace,energy,entropy".
std::vector<ConstraintKind> parse_constraint_list(const std::string& text);
std::string constraint_list_name(const std::vector<ConstraintKind>& kinds);
BellLabel parse_bell_label(const std::string& text);
std::string bell_label_name(BellLabel label);

struct Baseline {
  HermitianOperator rho0;
  HermitianOperator gamma0;
  PauliCoefficients eta0;
};

Baseline resolve_baseline(const BaselineSpec& spec);

/// Constraint set with baseline targets, switched to sampled targets where
/// the config supplies a distribution.
ConstraintSet build_constraints(const RunConfig& config, const Baseline& baseline);

struct SampleMeasures {
  std::size_t index = 0;
  MeasureReport report;
  int solver_iterations = 0;
  double residual_max = 0.0;
};

struct CaseResult {
  std::string name;
  EnsembleResult ensemble;
  std::vector<SampleMeasures> measures;
  CorrelationMatrix corr_constrained;
  CorrelationMatrix corr_raw;
  nlohmann::ordered_json summary;
};

/// Column order of samples.csv.
const std::vector<std::string>& sample_columns();
/// The measure columns that get a histogram.
const std::vector<std::string>& measure_names();
double measure_value(const MeasureReport& r, const std::string& name);

/// Thrown when the failure rate exceeds config.max_failure_rate.
class SolverFailureAbort : public SolverDiverged {
 public:
  using SolverDiverged::SolverDiverged;
};

/// How theta and chord are measured against the baseline: between gamma0 and
/// the constrained gamma_r directly, or between the non-negative square roots
/// of rho0 and rho_r.
enum class DistanceForm { PerturbedRoot, PsdRoot };

/// Generates one constrained ensemble and computes its tables in memory.
CaseResult run_case(const RunConfig& config, const std::string& name = "case",
                    DistanceForm form = DistanceForm::PerturbedRoot);

/// Writes samples.csv, etas_raw.csv, etas_constrained.csv, corr.csv,
/// corr_raw.csv, hist_<measure>.json, rho_r.json and summary.json.
void write_case(const CaseResult& result, const RunConfig& config, const std::filesystem::path& dir);

/// Runs `config` into config.out_dir, or the four standard cases (trace;
/// trace+energy; trace+entropy; trace+energy+entropy) into case1..case4 when
/// `all_cases` is set.
std::vector<CaseResult> run_cases(const RunConfig& config, bool all_cases = false);

struct FittedTargets {
  Moments energy;
  Moments entropy;
  PauliCoefficients mu_eta;
  PauliCoefficients sigma_eta;
  std::size_t count = 0;

  nlohmann::ordered_json to_json() const;
};

/// Per-state energy, entropy and eta = recover_eta(sqrt(rho), gamma0), then
/// sample mean / standard deviation. gamma0 defaults to |Phi+><Phi+|.
FittedTargets fit_targets(const ExperimentEnsemble& ensemble, const TwoQubitHamiltonian& hamiltonian);
FittedTargets fit_targets(const ExperimentEnsemble& ensemble, const TwoQubitHamiltonian& hamiltonian,
                          const HermitianOperator& gamma0);

struct MeasureOverlap {
  std::string measure;
  Moments experiment;
  Moments simulated;
  double mean_difference = 0.0;  ///< simulated - experiment
  double stddev_ratio = 0.0;     ///< simulated / experiment (0 when experiment stddev is 0)
};

struct ComparisonResult {
  CaseResult simulated;
  std::vector<MeasureReport> experiment;
  CorrelationMatrix corr_experiment;
  std::vector<MeasureOverlap> overlap;
};

/// Simulates an ensemble around the ideal |Phi+> baseline with targets taken
/// from the config or fitted to `ensemble`, then compares measure
/// distributions and eta correlations. Writes to config.out_dir.
ComparisonResult compare_to_experiment(const RunConfig& config, const ExperimentEnsemble& ensemble,
                                       bool write_outputs = true);

}  // namespace qperturb
