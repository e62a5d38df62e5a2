#pragma once

// Constrained random perturbation of a square-root operator gamma0.
//
//   gamma_eps = gamma0 + 1/2 sum eta_ij sigma_i (x) sigma_j,   eta_ij ~ N(mu_ij, sigma_ij)
//   gamma_r   = gamma_eps - sum_k lambda_k {G_k(gamma_eps^2), gamma_eps}
//
// The multipliers lambda_k are chosen so that every constraint value of
// rho_r = gamma_r^2 hits its target. The gradients G_k are evaluated once at
// gamma_eps and held fixed while lambda varies.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "qperturb/linalg.hpp"
#include "qperturb/pauli.hpp"

namespace qperturb {

struct PerturbationConfig {
  PauliCoefficients mu;     ///< per-entry mean of eta_ij
  PauliCoefficients sigma;  ///< per-entry standard deviation of eta_ij, all >= 0
  std::uint64_t seed = 0;
  std::size_t sample_count = 1;

  /// mu = 0 and sigma_ij = s for every entry.
  static PerturbationConfig uniform(double s, std::uint64_t seed, std::size_t samples);
  void validate() const;
};

enum class StreamPurpose : std::uint32_t { Perturbation = 0, Targets = 1 };

/// Independent generator for one (seed, sample index, attempt, purpose) key.
/// Streams never depend on worker count or scheduling.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t attempt,
                            StreamPurpose purpose);

enum class ConstraintKind { UnitTrace, Energy, Entropy };

const char* to_string(ConstraintKind kind);

struct NormalTarget {
  double mean = 0.0;
  double stddev = 0.0;
};

/// One expectation-value constraint. Entropy targets are S = -Tr(rho ln rho)
/// in nats.
struct Constraint {
  ConstraintKind kind = ConstraintKind::UnitTrace;
  double target = 1.0;
  std::optional<NormalTarget> sampled;              ///< draw a fresh target per sample
  std::optional<TwoQubitHamiltonian> hamiltonian;   ///< Energy only
};

/// Ordered constraints; UnitTrace first, no duplicate kinds.
class ConstraintSet {
 public:
  explicit ConstraintSet(std::vector<Constraint> constraints);

  static ConstraintSet unit_trace();
  /// Fixed targets taken from the baseline state rho0.
  static ConstraintSet for_baseline(const std::vector<ConstraintKind>& kinds,
                                    const HermitianOperator& rho0,
                                    const std::optional<TwoQubitHamiltonian>& hamiltonian);

  const std::vector<Constraint>& items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  const Constraint& operator[](std::size_t i) const { return items_[i]; }
  bool has(ConstraintKind kind) const noexcept;
  Constraint& at(ConstraintKind kind);

  std::vector<double> fixed_targets() const;

 private:
  void validate() const;
  std::vector<Constraint> items_;
};

/// Tr(rho C(rho)): trace, Tr(rho H), or the entropy -Tr(rho B ln rho).
double constraint_value(const HermitianOperator& rho, const Constraint& constraint);

/// G(gamma^2): I for the trace, H for the energy, -I - B ln(gamma^2) for the entropy.
HermitianOperator constraint_gradient(const Constraint& constraint, const HermitianOperator& gamma);

struct SolverOptions {
  int max_iterations = 100;
  double tolerance = 1e-10;
  double jacobian_step = 1e-7;
  int max_halvings = 20;
};

struct ConstraintSolution {
  HermitianOperator gamma_r = HermitianOperator::zero(4);
  std::vector<double> lambdas;
  std::vector<double> residuals;  ///< value_k(gamma_r^2) - target_k
  int iterations = 0;
  bool converged = false;
  double max_residual() const;
};

/// Solves for the multipliers with damped Newton from lambda = 0. Never throws
/// on divergence; check `converged`. Throws NonPhysicalResult if gamma_r^2
/// fails the PSD clamp window.
ConstraintSolution apply_constraints(const HermitianOperator& gamma_eps,
                                     const ConstraintSet& constraints,
                                     const std::vector<double>& targets,
                                     const SolverOptions& options = {});

struct GammaEpsilon {
  HermitianOperator gamma_eps;
  PauliCoefficients eta_raw;
};

/// Draws eta ~ N(mu, sigma) from the (seed, index, attempt) perturbation stream.
GammaEpsilon sample_gamma_epsilon(const HermitianOperator& gamma0, const PerturbationConfig& config,
                                  std::uint64_t index, std::uint64_t attempt = 0);

/// Adds an explicit eta to gamma0.
GammaEpsilon perturb_with(const HermitianOperator& gamma0, const PauliCoefficients& eta);

/// Per-sample targets: the fixed value or a normal draw. Entropy draws outside
/// [0, ln 4] are redrawn.
std::vector<double> sample_targets(const ConstraintSet& constraints, std::mt19937_64& rng);

/// eta^{Cn}_ij = 1/2 Tr[(gamma_r - gamma0) sigma_i (x) sigma_j].
PauliCoefficients recover_eta(const HermitianOperator& gamma_r, const HermitianOperator& gamma0);

/// Closed-form unit-trace correction: eta[gamma_r] = (eta[gamma0] + eta) / t_eps
/// with t_eps^2 = Tr(gamma_eps^2). Returns the coefficients of gamma_r itself.
PauliCoefficients analytic_unit_trace(const PauliCoefficients& eta_gamma0,
                                      const PauliCoefficients& eta_raw);

/// Scalars of the {trace, energy} system written in terms of gamma_eps:
/// g1 = Tr(g^2), g2 = Tr(g^2 H), g3 = Tr({H,g}^2), g4 = Tr({H,g}^2 H).
struct TraceEnergyCoefficients {
  double g1 = 0.0;
  double g2 = 0.0;
  double g3 = 0.0;
  double g4 = 0.0;
};

TraceEnergyCoefficients trace_energy_coefficients(const HermitianOperator& gamma_eps,
                                                  const TwoQubitHamiltonian& hamiltonian);

/// Residuals of the scalar {trace, energy} system for
/// gamma_r = (1 - 2 l1) gamma_eps - l2 {H, gamma_eps}:
///   (1-2l1)^2 g1 - 4 (1-2l1) l2 g2 + l2^2 g3 - 1
///   (1-2l1)^2 g2 -   (1-2l1) l2 g3 + l2^2 g4 - E0
std::pair<double, double> trace_energy_residuals(const HermitianOperator& gamma_eps,
                                                 const TwoQubitHamiltonian& hamiltonian,
                                                 double target_energy, double lambda_trace,
                                                 double lambda_energy);

struct PerturbedSample {
  std::size_t index = 0;    ///< output slot
  std::size_t attempt = 0;  ///< draw that produced the accepted sample
  HermitianOperator gamma_eps = HermitianOperator::zero(4);
  HermitianOperator gamma_r = HermitianOperator::zero(4);
  HermitianOperator rho_r = HermitianOperator::zero(4);
  std::vector<double> targets;
  std::vector<double> lambdas;
  std::vector<double> residuals;
  PauliCoefficients eta_raw;
  PauliCoefficients eta_constrained;
  int solver_iterations = 0;
};

enum class FailurePolicy { Redraw, Abort };

struct EnsembleOptions {
  FailurePolicy policy = FailurePolicy::Redraw;
  unsigned threads = 0;  ///< 0 = hardware concurrency
  SolverOptions solver;
  std::size_t max_attempts_per_sample = 100;
};

struct EnsembleResult {
  std::vector<PerturbedSample> samples;  ///< ordered by slot index
  std::size_t attempts = 0;
  std::size_t failures = 0;
  double failure_rate() const noexcept {
    return attempts == 0 ? 0.0 : static_cast<double>(failures) / static_cast<double>(attempts);
  }
};

/// Draws, constrains and records `config.sample_count` samples in parallel.
/// A failed solve for slot i is redrawn with attempt + 1 on the same slot
/// (or throws SolverDiverged under FailurePolicy::Abort).
EnsembleResult generate_ensemble(const HermitianOperator& gamma0, const PerturbationConfig& config,
                                 const ConstraintSet& constraints,
                                 const EnsembleOptions& options = {});

/// Runs fn(i) for i in [0, count) on `threads` workers.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace qperturb
