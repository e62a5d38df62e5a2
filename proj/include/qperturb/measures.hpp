#pragma once

// Distance and entanglement measures on two-qubit density operators.
// All logarithms are natural.

#include "qperturb/linalg.hpp"
#include "qperturb/pauli.hpp"

namespace qperturb {

/// F = Tr sqrt(g1 rho2 g1) with g1 = sqrt(rho1).
double fidelity(const HermitianOperator& rho1, const HermitianOperator& rho2);

struct StateDistance {
  double theta = 0.0;  ///< central angle, arccos Tr(g1 g2), in [0, pi]
  double chord = 0.0;  ///< sqrt Tr[(g1 - g2)^2], in [0, 2]
};

/// Distance between the non-negative square roots of two density operators.
StateDistance state_distance(const HermitianOperator& rho1, const HermitianOperator& rho2);

/// Distance between two unit-norm Hermitian operators directly, e.g. gamma0
/// and a constrained gamma_r that need not be PSD. chord equals the norm of
/// the Pauli coefficients of g1 - g2; theta = 2 arcsin(chord / 2).
StateDistance root_distance(const HermitianOperator& gamma1, const HermitianOperator& gamma2);

/// S = -Tr(rho ln rho) on the range of rho.
double von_neumann_entropy(const HermitianOperator& rho);

/// S(rho_A) + S(rho_B) - S(rho).
double mutual_information(const HermitianOperator& rho);

/// Wootters concurrence max(0, r1 - r2 - r3 - r4), r_i the decreasing
/// eigenvalues of sqrt(g rho~ g), rho~ = (Y (x) Y) rho* (Y (x) Y).
double concurrence(const HermitianOperator& rho);

/// Correlation matrix t_ij = Tr[rho sigma_i (x) sigma_j], i, j in {1, 2, 3}.
ComplexMatrix correlation_tensor(const HermitianOperator& rho);

/// 2 sqrt(u1 + u2) with u1, u2 the two largest eigenvalues of T^T T.
double chsh_max(const HermitianOperator& rho);

/// Tr(rho H).
double energy_expectation(const HermitianOperator& rho, const TwoQubitHamiltonian& hamiltonian);

struct MeasureReport {
  double fidelity = 0.0;
  double theta = 0.0;
  double chord = 0.0;
  double energy = 0.0;
  double entropy = 0.0;
  double mutual_information = 0.0;
  double concurrence = 0.0;
  double chsh_max = 0.0;
};

/// Every measure of rho. fidelity, theta and chord are relative to rho0;
/// theta/chord use `gamma` and `gamma0` when given, else the PSD roots.
MeasureReport measure_state(const HermitianOperator& rho, const HermitianOperator& rho0,
                            const TwoQubitHamiltonian& hamiltonian,
                            const HermitianOperator* gamma = nullptr,
                            const HermitianOperator* gamma0 = nullptr);

}  // namespace qperturb
