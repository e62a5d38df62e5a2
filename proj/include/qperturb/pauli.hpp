#pragma once

// Two-qubit Pauli product basis, Bell-diagonal states and the qubit
// Hamiltonian. Pauli order is (I, X, Y, Z); the computational basis is
// |00>, |01>, |10>, |11> with qubit A as the left index.

#include <array>
#include <cstdint>
#include <random>

#include "qperturb/linalg.hpp"

namespace qperturb {

/// Real coefficients eta(i, j) of a Hermitian operator in the orthonormal
/// basis { (1/2) sigma_i (x) sigma_j }.
struct PauliCoefficients {
  std::array<std::array<double, 4>, 4> eta{};

  double& operator()(std::size_t i, std::size_t j) noexcept { return eta[i][j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return eta[i][j]; }

  /// Entry k in row-major order (k = 4 i + j).
  double flat(std::size_t k) const noexcept { return eta[k / 4][k % 4]; }
  double& flat(std::size_t k) noexcept { return eta[k / 4][k % 4]; }

  /// Hilbert-Schmidt norm of the represented operator.
  double norm() const noexcept;

  PauliCoefficients& operator+=(const PauliCoefficients& rhs) noexcept;
  PauliCoefficients& operator-=(const PauliCoefficients& rhs) noexcept;
  friend PauliCoefficients operator+(PauliCoefficients a, const PauliCoefficients& b) { return a += b; }
  friend PauliCoefficients operator-(PauliCoefficients a, const PauliCoefficients& b) { return a -= b; }
  bool operator==(const PauliCoefficients&) const = default;
};

/// sigma_i for i in 0..3.
const ComplexMatrix& pauli(std::size_t i);
/// sigma_i (x) sigma_j.
const ComplexMatrix& pauli_product(std::size_t i, std::size_t j);

/// eta(i,j) = 1/2 Tr[omega (sigma_i (x) sigma_j)]. Throws NotHermitianInput if a
/// trace has an imaginary part above 1e-9.
PauliCoefficients pauli_project(const HermitianOperator& omega);

/// omega = 1/2 sum eta(i,j) sigma_i (x) sigma_j.
HermitianOperator pauli_reconstruct(const PauliCoefficients& eta);

/// Coefficient vector (c0..c3) and the eigen-amplitudes a, b, c, d of a
/// Bell-diagonal state. The squared amplitudes are the eigenvalues of rho0
/// for |Phi->, |Phi+>, |Psi+>, |Psi-> respectively.
struct BellDiagonalSpec {
  std::array<double, 4> coefficients{};
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
};

/// Validates c (c0 == 1, non-negative radicands) and computes the amplitudes.
BellDiagonalSpec make_bell_spec(const std::array<double, 4>& coefficients);

/// Builds the spec from four raw amplitudes; absolute values are normalized
/// to unit Euclidean norm.
BellDiagonalSpec bell_spec_from_amplitudes(const std::array<double, 4>& raw);

struct BellDiagonalState {
  HermitianOperator rho0;
  BellDiagonalSpec spec;
};

BellDiagonalState bell_diagonal_state(const std::array<double, 4>& coefficients);

struct BellDiagonalRoot {
  HermitianOperator gamma0;
  PauliCoefficients eta0;
};

/// Closed-form non-negative square root of a Bell-diagonal state.
BellDiagonalRoot bell_diagonal_sqrt(const BellDiagonalSpec& spec);

/// Four independent uniform draws on [-1, 1], passed to bell_spec_from_amplitudes.
/// An all-zero draw is redrawn.
BellDiagonalSpec random_bell_diagonal(std::mt19937_64& rng);

enum class BellLabel { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

/// |label><label|.
HermitianOperator bell_projector(BellLabel label);

/// H = -1/2 (w0 sigma_z (x) I + w1 I (x) sigma_z) with w = 2 pi f, f in GHz and
/// hbar = 1, so energies are in rad/ns.
struct TwoQubitHamiltonian {
  double f0 = 0.0;
  double f1 = 0.0;
  HermitianOperator op = HermitianOperator::zero(4);
};

TwoQubitHamiltonian build_hamiltonian(double f0_ghz, double f1_ghz);

}  // namespace qperturb
