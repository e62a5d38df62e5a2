#include "qperturb/perturb.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <string>
#include <thread>

#include "qperturb/errors.hpp"

namespace qperturb {

namespace {

const double kLn4 = std::log(4.0);

double entropy_of(const EigenDecomposition& eig) {
  double s = 0.0;
  for (double x : eig.eigenvalues) {
    if (x > kKernelThreshold) s -= x * std::log(x);
  }
  return s;
}

// Solves J x = b in place for N <= 3 with partial pivoting.
bool solve_linear(std::vector<std::vector<double>> jac, std::vector<double> rhs,
                  std::vector<double>& x) {
  const std::size_t n = rhs.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(jac[r][col]) > std::abs(jac[pivot][col])) pivot = r;
    if (!(std::abs(jac[pivot][col]) > 0.0) || !std::isfinite(jac[pivot][col])) return false;
    std::swap(jac[pivot], jac[col]);
    std::swap(rhs[pivot], rhs[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = jac[r][col] / jac[col][col];
      for (std::size_t c = col; c < n; ++c) jac[r][c] -= f * jac[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = rhs[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= jac[i][c] * x[c];
    x[i] = s / jac[i][i];
  }
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

double euclidean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Residual map lambda -> value_k(gamma_r(lambda)^2) - target_k with frozen
// correction directions.
class ResidualMap {
 public:
  ResidualMap(const HermitianOperator& gamma_eps, const ConstraintSet& constraints,
              const std::vector<double>& targets)
      : gamma_eps_(gamma_eps), constraints_(constraints), targets_(targets) {
    directions_.reserve(constraints.size());
    for (const Constraint& c : constraints.items()) {
      directions_.push_back(anticommutator(constraint_gradient(c, gamma_eps), gamma_eps));
    }
  }

  HermitianOperator gamma_at(const std::vector<double>& lambdas) const {
    ComplexMatrix g = gamma_eps_.matrix();
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
      if (lambdas[k] != 0.0) g -= directions_[k].matrix() * Complex(lambdas[k]);
    }
    return HermitianOperator(g);
  }

  std::vector<double> operator()(const std::vector<double>& lambdas) const {
    return residuals_of(gamma_at(lambdas));
  }

  std::vector<double> residuals_of(const HermitianOperator& gamma) const {
    const HermitianOperator rho(gamma.matrix() * gamma.matrix());
    std::vector<double> out(constraints_.size());
    for (std::size_t k = 0; k < constraints_.size(); ++k) {
      out[k] = constraint_value(rho, constraints_[k]) - targets_[k];
    }
    return out;
  }

 private:
  const HermitianOperator& gamma_eps_;
  const ConstraintSet& constraints_;
  const std::vector<double>& targets_;
  std::vector<HermitianOperator> directions_;
};

}  // namespace

PerturbationConfig PerturbationConfig::uniform(double s, std::uint64_t seed, std::size_t samples) {
  PerturbationConfig config;
  for (std::size_t k = 0; k < 16; ++k) config.sigma.flat(k) = s;
  config.seed = seed;
  config.sample_count = samples;
  config.validate();
  return config;
}

void PerturbationConfig::validate() const {
  for (std::size_t k = 0; k < 16; ++k) {
    if (!(sigma.flat(k) >= 0.0) || !std::isfinite(sigma.flat(k))) {
      throw InvalidArgument("sigma entries must be finite and >= 0");
    }
    if (!std::isfinite(mu.flat(k))) throw InvalidArgument("mu entries must be finite");
  }
  if (sample_count < 1) throw InvalidArgument("sample_count must be >= 1");
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t attempt,
                            StreamPurpose purpose) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed),    hi(seed),    lo(index), hi(index),
                    lo(attempt), hi(attempt), static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

const char* to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::UnitTrace:
      return "trace";
    case ConstraintKind::Energy:
      return "energy";
    case ConstraintKind::Entropy:
      return "entropy";
  }
  return "unknown";
}

ConstraintSet::ConstraintSet(std::vector<Constraint> constraints)
    : items_(std::move(constraints)) {
  validate();
}

void ConstraintSet::validate() const {
  if (items_.empty() || items_.front().kind != ConstraintKind::UnitTrace) {
    throw InvalidArgument("constraint set must start with the unit-trace constraint");
  }
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const Constraint& c = items_[i];
    for (std::size_t j = 0; j < i; ++j) {
      if (items_[j].kind == c.kind) {
        throw InvalidArgument(std::string("duplicate constraint ") + to_string(c.kind));
      }
    }
    switch (c.kind) {
      case ConstraintKind::UnitTrace:
        if (c.target != 1.0 || c.sampled) {
          throw InvalidArgument("unit-trace target is fixed at 1");
        }
        break;
      case ConstraintKind::Energy:
        if (!c.hamiltonian) throw InvalidArgument("energy constraint needs a Hamiltonian");
        break;
      case ConstraintKind::Entropy:
        if (!c.sampled && (c.target < 0.0 || c.target > kLn4 + 1e-12)) {
          throw InvalidArgument("entropy target outside [0, ln 4]");
        }
        break;
    }
    if (c.sampled && !(c.sampled->stddev >= 0.0)) {
      throw InvalidArgument("target standard deviation must be >= 0");
    }
  }
}

ConstraintSet ConstraintSet::unit_trace() { return ConstraintSet({Constraint{}}); }

ConstraintSet ConstraintSet::for_baseline(const std::vector<ConstraintKind>& kinds,
                                          const HermitianOperator& rho0,
                                          const std::optional<TwoQubitHamiltonian>& hamiltonian) {
  std::vector<Constraint> items{Constraint{}};
  for (ConstraintKind kind : kinds) {
    if (kind == ConstraintKind::UnitTrace) continue;
    Constraint c;
    c.kind = kind;
    if (kind == ConstraintKind::Energy) {
      if (!hamiltonian) throw InvalidArgument("energy constraint needs a Hamiltonian");
      c.hamiltonian = hamiltonian;
    }
    c.target = constraint_value(rho0, c);
    items.push_back(std::move(c));
  }
  return ConstraintSet(std::move(items));
}

bool ConstraintSet::has(ConstraintKind kind) const noexcept {
  return std::any_of(items_.begin(), items_.end(),
                     [kind](const Constraint& c) { return c.kind == kind; });
}

Constraint& ConstraintSet::at(ConstraintKind kind) {
  for (Constraint& c : items_)
    if (c.kind == kind) return c;
  throw InvalidArgument(std::string("constraint not present: ") + to_string(kind));
}

std::vector<double> ConstraintSet::fixed_targets() const {
  std::vector<double> out;
  out.reserve(items_.size());
  for (const Constraint& c : items_) out.push_back(c.target);
  return out;
}

double constraint_value(const HermitianOperator& rho, const Constraint& constraint) {
  switch (constraint.kind) {
    case ConstraintKind::UnitTrace:
      return rho.trace();
    case ConstraintKind::Energy:
      return trace_product(rho, constraint.hamiltonian->op);
    case ConstraintKind::Entropy: {
      const EigenDecomposition eig = eig_hermitian(rho);
      require_psd(eig);
      return entropy_of(eig);
    }
  }
  return 0.0;
}

HermitianOperator constraint_gradient(const Constraint& constraint,
                                      const HermitianOperator& gamma) {
  const std::size_t n = gamma.dim();
  switch (constraint.kind) {
    case ConstraintKind::UnitTrace:
      return HermitianOperator::identity(n);
    case ConstraintKind::Energy:
      return constraint.hamiltonian->op;
    case ConstraintKind::Entropy: {
      const HermitianOperator rho(gamma.matrix() * gamma.matrix());
      return (-1.0) * (HermitianOperator::identity(n) + matrix_log_ranged(rho));
    }
  }
  return HermitianOperator::zero(n);
}

double ConstraintSolution::max_residual() const { return max_abs(residuals); }

ConstraintSolution apply_constraints(const HermitianOperator& gamma_eps,
                                     const ConstraintSet& constraints,
                                     const std::vector<double>& targets,
                                     const SolverOptions& options) {
  if (targets.size() != constraints.size()) {
    throw InvalidArgument("one target per constraint required");
  }
  const std::size_t n = constraints.size();
  ConstraintSolution out;
  out.lambdas.assign(n, 0.0);

  // Zero residual at lambda = 0: return gamma_eps unchanged. This also covers
  // the rank-deficient unperturbed baseline where the entropy gradient is
  // not defined off the range.
  std::vector<double> f(n);
  {
    const HermitianOperator rho(gamma_eps.matrix() * gamma_eps.matrix());
    for (std::size_t k = 0; k < n; ++k) f[k] = constraint_value(rho, constraints[k]) - targets[k];
  }

  if (max_abs(f) <= options.tolerance) {
    out.gamma_r = gamma_eps;
    out.residuals = f;
    out.converged = true;
  } else {
    const ResidualMap residual(gamma_eps, constraints, targets);
    std::vector<double> lambdas(n, 0.0);
    double norm = euclidean(f);
    int iter = 0;
    bool converged = false;
    while (iter < options.max_iterations) {
      ++iter;
      std::vector<std::vector<double>> jac(n, std::vector<double>(n));
      for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> plus = lambdas, minus = lambdas;
        plus[j] += options.jacobian_step;
        minus[j] -= options.jacobian_step;
        const std::vector<double> fp = residual(plus);
        const std::vector<double> fm = residual(minus);
        for (std::size_t i = 0; i < n; ++i) {
          jac[i][j] = (fp[i] - fm[i]) / (2.0 * options.jacobian_step);
        }
      }
      std::vector<double> rhs(n);
      for (std::size_t i = 0; i < n; ++i) rhs[i] = -f[i];
      std::vector<double> step;
      if (!solve_linear(jac, rhs, step)) break;

      double scale = 1.0;
      bool decreased = false;
      std::vector<double> trial_lambdas;
      std::vector<double> trial_f;
      for (int h = 0; h <= options.max_halvings; ++h) {
        trial_lambdas = lambdas;
        for (std::size_t i = 0; i < n; ++i) trial_lambdas[i] += scale * step[i];
        try {
          trial_f = residual(trial_lambdas);
        } catch (const NotPositiveSemidefinite&) {
          scale *= 0.5;
          continue;
        }
        const double trial_norm = euclidean(trial_f);
        if (std::isfinite(trial_norm) && trial_norm < norm) {
          decreased = true;
          break;
        }
        scale *= 0.5;
      }
      if (!decreased) break;
      lambdas = std::move(trial_lambdas);
      f = std::move(trial_f);
      norm = euclidean(f);
      if (max_abs(f) <= options.tolerance) {
        converged = true;
        break;
      }
    }
    out.lambdas = lambdas;
    out.gamma_r = residual.gamma_at(lambdas);
    out.residuals = f;
    out.iterations = iter;
    out.converged = converged;
  }

  const HermitianOperator rho_r(out.gamma_r.matrix() * out.gamma_r.matrix());
  const EigenDecomposition eig = eig_hermitian(rho_r);
  if (eig.eigenvalues.front() < -kPsdClampWindow) {
    throw NonPhysicalResult("gamma_r^2 has eigenvalue " + std::to_string(eig.eigenvalues.front()));
  }
  return out;
}

GammaEpsilon perturb_with(const HermitianOperator& gamma0, const PauliCoefficients& eta) {
  return {gamma0 + pauli_reconstruct(eta), eta};
}

GammaEpsilon sample_gamma_epsilon(const HermitianOperator& gamma0, const PerturbationConfig& config,
                                  std::uint64_t index, std::uint64_t attempt) {
  std::mt19937_64 rng = make_stream(config.seed, index, attempt, StreamPurpose::Perturbation);
  std::normal_distribution<double> normal(0.0, 1.0);
  PauliCoefficients eta;
  for (std::size_t k = 0; k < 16; ++k) {
    const double z = normal(rng);
    eta.flat(k) = config.mu.flat(k) + config.sigma.flat(k) * z;
  }
  return perturb_with(gamma0, eta);
}

std::vector<double> sample_targets(const ConstraintSet& constraints, std::mt19937_64& rng) {
  std::vector<double> out;
  out.reserve(constraints.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const Constraint& c : constraints.items()) {
    if (!c.sampled) {
      out.push_back(c.target);
      continue;
    }
    const NormalTarget& dist = *c.sampled;
    double value = dist.mean + dist.stddev * normal(rng);
    if (c.kind == ConstraintKind::Entropy) {
      if (dist.stddev == 0.0) {
        value = std::clamp(dist.mean, 0.0, kLn4);
      } else {
        int tries = 0;
        while (value < 0.0 || value > kLn4) {
          if (++tries > 10000) {
            throw InvalidArgument("entropy target distribution has no mass in [0, ln 4]");
          }
          value = dist.mean + dist.stddev * normal(rng);
        }
      }
    }
    out.push_back(value);
  }
  return out;
}

PauliCoefficients recover_eta(const HermitianOperator& gamma_r, const HermitianOperator& gamma0) {
  return pauli_project(gamma_r - gamma0);
}

PauliCoefficients analytic_unit_trace(const PauliCoefficients& eta_gamma0,
                                      const PauliCoefficients& eta_raw) {
  PauliCoefficients eps = eta_gamma0 + eta_raw;
  const double t = eps.norm();
  if (!(t > 0.0)) throw InvalidArgument("gamma_eps vanishes");
  for (std::size_t k = 0; k < 16; ++k) eps.flat(k) /= t;
  return eps;
}

TraceEnergyCoefficients trace_energy_coefficients(const HermitianOperator& gamma_eps,
                                                  const TwoQubitHamiltonian& hamiltonian) {
  const HermitianOperator& h = hamiltonian.op;
  const HermitianOperator g2(gamma_eps.matrix() * gamma_eps.matrix());
  const HermitianOperator hg = anticommutator(h, gamma_eps);
  const HermitianOperator hg2(hg.matrix() * hg.matrix());
  return {g2.trace(), trace_product(g2, h), hg2.trace(), trace_product(hg2, h)};
}

std::pair<double, double> trace_energy_residuals(const HermitianOperator& gamma_eps,
                                                 const TwoQubitHamiltonian& hamiltonian,
                                                 double target_energy, double lambda_trace,
                                                 double lambda_energy) {
  const TraceEnergyCoefficients g = trace_energy_coefficients(gamma_eps, hamiltonian);
  const double s = 1.0 - 2.0 * lambda_trace;
  const double l = lambda_energy;
  const double trace = s * s * g.g1 - 4.0 * s * l * g.g2 + l * l * g.g3 - 1.0;
  const double energy = s * s * g.g2 - s * l * g.g3 + l * l * g.g4 - target_energy;
  return {trace, energy};
}

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= count) return;
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next.store(count);
            return;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

EnsembleResult generate_ensemble(const HermitianOperator& gamma0, const PerturbationConfig& config,
                                 const ConstraintSet& constraints,
                                 const EnsembleOptions& options) {
  config.validate();
  const std::size_t n = config.sample_count;
  std::vector<std::optional<PerturbedSample>> slots(n);
  std::vector<std::size_t> attempts(n, 0);

  parallel_for(n, options.threads, [&](std::size_t slot) {
    for (std::size_t attempt = 0; attempt < options.max_attempts_per_sample; ++attempt) {
      attempts[slot] = attempt + 1;
      const GammaEpsilon draw = sample_gamma_epsilon(gamma0, config, slot, attempt);
      std::mt19937_64 target_rng = make_stream(config.seed, slot, attempt, StreamPurpose::Targets);
      std::vector<double> targets = sample_targets(constraints, target_rng);
      ConstraintSolution sol = apply_constraints(draw.gamma_eps, constraints, targets, options.solver);
      if (!sol.converged) {
        if (options.policy == FailurePolicy::Abort) {
          throw SolverDiverged("multiplier solve diverged for sample " + std::to_string(slot));
        }
        continue;
      }
      PerturbedSample s;
      s.index = slot;
      s.attempt = attempt;
      s.gamma_eps = draw.gamma_eps;
      s.rho_r = HermitianOperator(sol.gamma_r.matrix() * sol.gamma_r.matrix());
      s.gamma_r = std::move(sol.gamma_r);
      s.targets = std::move(targets);
      s.lambdas = std::move(sol.lambdas);
      s.residuals = std::move(sol.residuals);
      s.eta_raw = draw.eta_raw;
      s.eta_constrained = recover_eta(s.gamma_r, gamma0);
      s.solver_iterations = sol.iterations;
      slots[slot] = std::move(s);
      return;
    }
    throw SolverDiverged("no converged draw for sample " + std::to_string(slot) + " after " +
                         std::to_string(options.max_attempts_per_sample) + " attempts");
  });

  EnsembleResult result;
  result.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    result.attempts += attempts[i];
    result.failures += attempts[i] - 1;
    result.samples.push_back(std::move(*slots[i]));
  }
  return result;
}

}  // namespace qperturb
