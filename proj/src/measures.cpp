#include "qperturb/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "qperturb/errors.hpp"

namespace qperturb {

namespace {

// Domain excursions tolerated for arccos / arcsin arguments.
constexpr double kDomainSlack = 1e-9;

double clamp_domain(double x, double lo, double hi, const char* what) {
  if (x < lo - kDomainSlack || x > hi + kDomainSlack) {
    throw InvalidArgument(std::string(what) + " argument out of domain: " + std::to_string(x));
  }
  return std::clamp(x, lo, hi);
}

double entropy_from(const EigenDecomposition& eig) {
  double s = 0.0;
  for (double x : eig.eigenvalues)
    if (x > kKernelThreshold) s -= x * std::log(x);
  return s;
}

HermitianOperator psd_root(const HermitianOperator& rho) { return matrix_sqrt_psd(rho); }


}  // namespace

double fidelity(const HermitianOperator& rho1, const HermitianOperator& rho2) {
  const HermitianOperator g1 = psd_root(rho1);
  require_psd(eig_hermitian(rho2));
  const HermitianOperator m(g1.matrix() * rho2.matrix() * g1.matrix());
  const EigenDecomposition eig = eig_hermitian(m);
  require_psd(eig);
  double f = 0.0;
  for (double x : eig.eigenvalues) f += x > 0.0 ? std::sqrt(x) : 0.0;
  // Roots of rounding-level eigenvalues can push F a hair above 1.
  return std::min(f, 1.0);
}

StateDistance root_distance(const HermitianOperator& gamma1, const HermitianOperator& gamma2) {
  const HermitianOperator diff = gamma1 - gamma2;
  StateDistance d;
  d.chord = std::sqrt(std::max(trace_product(diff, diff), 0.0));
  d.theta = 2.0 * std::asin(clamp_domain(0.5 * d.chord, 0.0, 1.0, "arcsin"));
  return d;
}

StateDistance state_distance(const HermitianOperator& rho1, const HermitianOperator& rho2) {
  const HermitianOperator g1 = psd_root(rho1);
  const HermitianOperator g2 = psd_root(rho2);
  const double overlap = clamp_domain(trace_product(g1, g2), -1.0, 1.0, "arccos");
  StateDistance d;
  d.theta = std::acos(overlap);
  d.chord = 2.0 * std::sin(0.5 * d.theta);
  return d;
}

double von_neumann_entropy(const HermitianOperator& rho) {
  const EigenDecomposition eig = eig_hermitian(rho);
  require_psd(eig);
  return entropy_from(eig);
}

double mutual_information(const HermitianOperator& rho) {
  if (rho.dim() != 4) throw DimensionMismatch("mutual_information expects a 4x4 state");
  return von_neumann_entropy(partial_trace(rho, Subsystem::A)) +
         von_neumann_entropy(partial_trace(rho, Subsystem::B)) - von_neumann_entropy(rho);
}

double concurrence(const HermitianOperator& rho) {
  if (rho.dim() != 4) throw DimensionMismatch("concurrence expects a 4x4 state");
  const HermitianOperator g = psd_root(rho);
  // sigma_y (x) sigma_y. The sigma_x flip would give C = 1 on product states such as |++>.
  const ComplexMatrix& flip = pauli_product(2, 2);
  const ComplexMatrix tilde = flip * rho.matrix().conjugate() * flip;
  const HermitianOperator r2(g.matrix() * tilde * g.matrix());
  const EigenDecomposition eig = eig_hermitian(r2);
  require_psd(eig);
  std::vector<double> r;
  for (double x : eig.eigenvalues) r.push_back(x > 0.0 ? std::sqrt(x) : 0.0);
  std::sort(r.begin(), r.end(), std::greater<>());
  return std::max(0.0, r[0] - r[1] - r[2] - r[3]);
}

ComplexMatrix correlation_tensor(const HermitianOperator& rho) {
  if (rho.dim() != 4) throw DimensionMismatch("correlation_tensor expects a 4x4 state");
  ComplexMatrix t(3);
  for (std::size_t i = 1; i <= 3; ++i)
    for (std::size_t j = 1; j <= 3; ++j) {
      const ComplexMatrix prod = rho.matrix() * pauli_product(i, j);
      t(i - 1, j - 1) = prod.trace().real();
    }
  return t;
}

double chsh_max(const HermitianOperator& rho) {
  require_psd(eig_hermitian(rho));
  const ComplexMatrix t = correlation_tensor(rho);
  const EigenDecomposition eig = eig_hermitian(HermitianOperator(t.transpose() * t));
  const double u = std::max(0.0, eig.eigenvalues[2]) + std::max(0.0, eig.eigenvalues[1]);
  return 2.0 * std::sqrt(u);
}

double energy_expectation(const HermitianOperator& rho, const TwoQubitHamiltonian& hamiltonian) {
  return trace_product(rho, hamiltonian.op);
}

MeasureReport measure_state(const HermitianOperator& rho, const HermitianOperator& rho0,
                            const TwoQubitHamiltonian& hamiltonian, const HermitianOperator* gamma,
                            const HermitianOperator* gamma0) {
  MeasureReport r;
  r.fidelity = fidelity(rho0, rho);
  const StateDistance d =
      (gamma && gamma0) ? root_distance(*gamma0, *gamma) : state_distance(rho0, rho);
  r.theta = d.theta;
  r.chord = d.chord;
  r.energy = energy_expectation(rho, hamiltonian);
  r.entropy = von_neumann_entropy(rho);
  r.mutual_information = mutual_information(rho);
  r.concurrence = concurrence(rho);
  r.chsh_max = chsh_max(rho);
  return r;
}

}  // namespace qperturb
