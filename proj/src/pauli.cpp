#include "qperturb/pauli.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "qperturb/errors.hpp"

namespace qperturb {

namespace {

constexpr double kImaginaryResidueLimit = 1e-9;

std::array<ComplexMatrix, 4> make_paulis() {
  using namespace std::complex_literals;
  const Complex x[] = {0.0, 1.0, 1.0, 0.0};
  const Complex y[] = {0.0, -1.0i, 1.0i, 0.0};
  const Complex z[] = {1.0, 0.0, 0.0, -1.0};
  return {ComplexMatrix::identity(2), ComplexMatrix(2, x), ComplexMatrix(2, y),
          ComplexMatrix(2, z)};
}

std::array<std::array<ComplexMatrix, 4>, 4> make_products() {
  std::array<std::array<ComplexMatrix, 4>, 4> out{{
      {ComplexMatrix(4), ComplexMatrix(4), ComplexMatrix(4), ComplexMatrix(4)},
      {ComplexMatrix(4), ComplexMatrix(4), ComplexMatrix(4), ComplexMatrix(4)},
      {ComplexMatrix(4), ComplexMatrix(4), ComplexMatrix(4), ComplexMatrix(4)},
      {ComplexMatrix(4), ComplexMatrix(4), ComplexMatrix(4), ComplexMatrix(4)},
  }};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) out[i][j] = kron(pauli(i), pauli(j));
  return out;
}

}  // namespace

double PauliCoefficients::norm() const noexcept {
  double s = 0.0;
  for (const auto& row : eta)
    for (double v : row) s += v * v;
  return std::sqrt(s);
}

PauliCoefficients& PauliCoefficients::operator+=(const PauliCoefficients& rhs) noexcept {
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) eta[i][j] += rhs.eta[i][j];
  return *this;
}

PauliCoefficients& PauliCoefficients::operator-=(const PauliCoefficients& rhs) noexcept {
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) eta[i][j] -= rhs.eta[i][j];
  return *this;
}

const ComplexMatrix& pauli(std::size_t i) {
  static const std::array<ComplexMatrix, 4> paulis = make_paulis();
  if (i > 3) throw InvalidArgument("Pauli index out of range");
  return paulis[i];
}

const ComplexMatrix& pauli_product(std::size_t i, std::size_t j) {
  static const auto products = make_products();
  if (i > 3 || j > 3) throw InvalidArgument("Pauli index out of range");
  return products[i][j];
}

PauliCoefficients pauli_project(const HermitianOperator& omega) {
  if (omega.dim() != 4) throw DimensionMismatch("pauli_project expects a 4x4 operator");
  PauliCoefficients out;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      const ComplexMatrix& basis = pauli_product(i, j);
      Complex tr = 0.0;
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t k = 0; k < 4; ++k) tr += omega(r, k) * basis(k, r);
      if (std::abs(tr.imag()) > kImaginaryResidueLimit) {
        throw NotHermitianInput("imaginary Pauli projection residue " +
                                std::to_string(tr.imag()));
      }
      out(i, j) = 0.5 * tr.real();
    }
  }
  return out;
}

HermitianOperator pauli_reconstruct(const PauliCoefficients& eta) {
  ComplexMatrix sum(4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      if (eta(i, j) != 0.0) sum += pauli_product(i, j) * Complex(0.5 * eta(i, j));
  return HermitianOperator(sum);
}

BellDiagonalSpec make_bell_spec(const std::array<double, 4>& c) {
  for (double v : c) {
    if (!std::isfinite(v)) throw InvalidBellCoefficients("non-finite Bell coefficient");
  }
  if (c[0] != 1.0) {
    throw InvalidBellCoefficients("c0 must equal 1, got " + std::to_string(c[0]));
  }
  const std::array<double, 4> radicands = {
      c[0] - c[1] + c[2] + c[3],
      c[0] + c[1] - c[2] + c[3],
      c[0] + c[1] + c[2] - c[3],
      c[0] - c[1] - c[2] - c[3],
  };
  std::array<double, 4> amp{};
  for (std::size_t k = 0; k < 4; ++k) {
    // Allow rounding noise from coefficients computed out of amplitudes.
    if (radicands[k] < -1e-12) {
      throw InvalidBellCoefficients("negative radicand " + std::to_string(radicands[k]));
    }
    amp[k] = 0.5 * std::sqrt(std::max(radicands[k], 0.0));
  }
  return {c, amp[0], amp[1], amp[2], amp[3]};
}

BellDiagonalSpec bell_spec_from_amplitudes(const std::array<double, 4>& raw) {
  const double norm =
      std::sqrt(raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2] + raw[3] * raw[3]);
  if (norm == 0.0) throw InvalidArgument("all-zero Bell amplitude draw");
  const double a = std::abs(raw[0]) / norm;
  const double b = std::abs(raw[1]) / norm;
  const double c = std::abs(raw[2]) / norm;
  const double d = std::abs(raw[3]) / norm;
  const double a2 = a * a, b2 = b * b, c2 = c * c, d2 = d * d;
  BellDiagonalSpec spec;
  // c0 is fixed at 1 rather than the rounded sum of squares.
  spec.coefficients = {1.0, -a2 + b2 + c2 - d2, a2 - b2 + c2 - d2, a2 + b2 - c2 - d2};
  spec.a = a;
  spec.b = b;
  spec.c = c;
  spec.d = d;
  return spec;
}

BellDiagonalState bell_diagonal_state(const std::array<double, 4>& coefficients) {
  BellDiagonalSpec spec = make_bell_spec(coefficients);
  ComplexMatrix rho(4);
  for (std::size_t i = 0; i < 4; ++i) {
    rho += pauli_product(i, i) * Complex(0.25 * coefficients[i]);
  }
  return {HermitianOperator(rho), spec};
}

BellDiagonalRoot bell_diagonal_sqrt(const BellDiagonalSpec& spec) {
  const double a = spec.a, b = spec.b, c = spec.c, d = spec.d;
  ComplexMatrix g(4);
  g(0, 0) = 0.5 * (a + b);
  g(0, 3) = 0.5 * (b - a);
  g(3, 0) = 0.5 * (b - a);
  g(3, 3) = 0.5 * (a + b);
  g(1, 1) = 0.5 * (c + d);
  g(1, 2) = 0.5 * (c - d);
  g(2, 1) = 0.5 * (c - d);
  g(2, 2) = 0.5 * (c + d);

  PauliCoefficients eta0;
  eta0(0, 0) = 0.5 * (a + b + c + d);
  eta0(1, 1) = 0.5 * (b - a + c - d);
  eta0(2, 2) = 0.5 * (a - b + c - d);
  eta0(3, 3) = 0.5 * (a + b - c - d);
  return {HermitianOperator(g), eta0};
}

BellDiagonalSpec random_bell_diagonal(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  for (;;) {
    std::array<double, 4> raw{};
    for (double& v : raw) v = uniform(rng);
    if (raw[0] != 0.0 || raw[1] != 0.0 || raw[2] != 0.0 || raw[3] != 0.0) {
      return bell_spec_from_amplitudes(raw);
    }
  }
}

HermitianOperator bell_projector(BellLabel label) {
  const double s = 1.0 / std::numbers::sqrt2;
  std::array<double, 4> v{};
  switch (label) {
    case BellLabel::PhiPlus:
      v = {s, 0.0, 0.0, s};
      break;
    case BellLabel::PhiMinus:
      v = {s, 0.0, 0.0, -s};
      break;
    case BellLabel::PsiPlus:
      v = {0.0, s, s, 0.0};
      break;
    case BellLabel::PsiMinus:
      v = {0.0, s, -s, 0.0};
      break;
  }
  ComplexMatrix m(4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) m(i, j) = v[i] * v[j];
  return HermitianOperator(m);
}

TwoQubitHamiltonian build_hamiltonian(double f0_ghz, double f1_ghz) {
  if (!(f0_ghz > 0.0) || !(f1_ghz > 0.0)) {
    throw InvalidArgument("qubit frequencies must be positive");
  }
  const double w0 = 2.0 * std::numbers::pi * f0_ghz;
  const double w1 = 2.0 * std::numbers::pi * f1_ghz;
  const std::array<double, 4> diag = {-0.5 * (w0 + w1), -0.5 * (w0 - w1), 0.5 * (w0 - w1),
                                      0.5 * (w0 + w1)};
  return {f0_ghz, f1_ghz, HermitianOperator(ComplexMatrix::diagonal(diag))};
}

}  // namespace qperturb
